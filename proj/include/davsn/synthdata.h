#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "davsn/flowwarp.h"
#include "davsn/tensor.h"

namespace davsn::synthdata {

enum class Domain : uint8_t { Source = 0, Target = 1 };

std::string domain_name(Domain d);
Domain domain_from_name(const std::string& s);

// Photometric/texture gap between domains. texture_id = -1 keeps the clip's
// current background texture, so the all-defaults shift is the identity.
struct DomainShift {
    double hue_shift = 0.0;        // rotation around the gray axis, radians
    double brightness_gain = 1.0;
    double noise_std = 0.0;
    int texture_id = -1;
    uint64_t noise_seed = 0;

    bool is_identity_for(int clip_texture_id) const {
        return hue_shift == 0.0 && brightness_gain == 1.0 && noise_std == 0.0 &&
               (texture_id < 0 || texture_id == clip_texture_id);
    }
};

// Per-object velocities; explicit entries win, otherwise sampled uniformly in
// [-max_speed, max_speed] per axis (snapped to integers by default so oracle
// flow and nearest label warping agree exactly).
struct MotionModel {
    double max_speed = 3.0;
    bool integer_velocities = true;
    std::vector<std::array<double, 2>> velocities;
};

struct ClipSpec {
    int height = 64;
    int width = 128;
    int num_frames = 3;   // >= 3: the method consumes (k-2, k-1, k) triples
    int num_classes = 5;  // class 0 reserved for background
    int num_objects = 4;
    MotionModel motion;
    DomainShift shift;
    uint64_t seed = 0;
    Domain domain = Domain::Source;

    void validate() const;
};

struct VideoClip {
    int height = 0, width = 0, num_frames = 0, num_classes = 0;
    Domain domain = Domain::Source;
    int texture_id = 0;
    std::vector<Tensor> frames;                    // T x [3,H,W], values in [0,1]
    std::vector<LabelMap> labels;                  // T x HxW
    std::vector<flowwarp::FlowField> flows_fwd;    // T-1, pair t on frame t grid (t -> t+1)
    std::vector<flowwarp::FlowField> flows_bwd;    // T-1, pair t on frame t+1 grid (t+1 -> t)
    std::vector<ByteMask> occlusion;               // T-1, on frame t+1 grid, 1 = occluded

    bool operator==(const VideoClip& o) const;
};

// Deterministic for fixed spec. Flows are the exact displacements of the
// rendered motion; occlusion marks pixels whose frame-t source location is
// covered by another class, out of frame, or unresolvable at raster precision
// (sub-pixel motion at a shape boundary).
VideoClip generate_clip(const ClipSpec& spec);

// Labels, flows and occlusion are untouched; only appearance changes, clamped
// to [0,1]. The identity shift returns a bit-identical clip.
VideoClip apply_domain_shift(const VideoClip& clip, const DomainShift& shift);

// Procedural background texture (static across frames): id selects a preset.
std::array<double, 3> background_texture(int texture_id, int x, int y);

struct ClipMeta {
    std::string name;
    int height = 0, width = 0, num_frames = 0, num_classes = 0;
    Domain domain = Domain::Source;
    int texture_id = 0;
};

struct DatasetManifest {
    int format_version = 1;
    std::vector<ClipMeta> clips;
    std::string spec_echo;  // free-form JSON recorded by the producer
};

// Layout: <path>/manifest.json plus one subdirectory per clip holding
// frames.bin, labels.bin, flow_fwd.bin, flow_bwd.bin, occ.bin (header-described
// little-endian arrays; flow files carry a one-byte direction tag) and
// meta.json with dtype/H/W/T/C. The manifest is written last.
DatasetManifest write_dataset(const std::vector<VideoClip>& clips, const std::string& path,
                              const std::string& spec_echo = "{}");
std::vector<VideoClip> load_dataset(const std::string& path);
DatasetManifest read_manifest(const std::string& path);
VideoClip load_clip(const std::string& dataset_path, const ClipMeta& meta);

} // namespace davsn::synthdata
