#pragma once

#include <utility>

#include "davsn/tensor.h"

namespace davsn::flowwarp {

// Direction convention. Backward = the field lives on the LATER frame's grid
// and maps each of its pixels to the location in the EARLIER frame; this is
// what backward-warping a previous-frame map onto the current grid consumes.
enum class FlowDirection : uint8_t { Backward = 0, Forward = 1 };

struct FlowField {
    Tensor data;  // [2,H,W]: channel 0 = dx, channel 1 = dy, pixels
    FlowDirection direction = FlowDirection::Backward;

    int height() const { return data.ndim() == 3 ? data.dim(1) : 0; }
    int width() const { return data.ndim() == 3 ? data.dim(2) : 0; }
    bool finite() const { return data.all_finite(); }

    static FlowField zero(int h, int w, FlowDirection dir) {
        return FlowField{Tensor({2, h, w}), dir};
    }
    static FlowField constant(int h, int w, double dx, double dy, FlowDirection dir);
};

// true = trustworthy correspondence.
struct ValidityMask {
    ByteMask m;
    bool at(int y, int x) const { return m.at(y, x) != 0; }
};

// output[y][x] = bilinear sample of map at (x+dx, y+dy); samples outside the
// frame are filled with uniform 1/C and marked invalid. map is [C,H,W].
std::pair<Tensor, ValidityMask> backward_warp(const Tensor& map, const FlowField& flow);

// Nearest-neighbour label warp, same convention; out-of-bounds pixels keep
// `fill_label` and are marked invalid.
std::pair<LabelMap, ValidityMask> backward_warp_labels(const LabelMap& labels, const FlowField& flow,
                                                       uint8_t fill_label = 0);

struct BlockMatchParams {
    int patch = 7;    // odd window size
    int radius = 4;   // max displacement searched per axis
};

// Integer-displacement block matching: for each pixel of frame_from, find its
// displacement into frame_to (SAD cost, ties broken toward zero displacement).
// Frames are [3,H,W]. The result lives on frame_from's grid and is tagged
// with the caller's direction (the training-side call passes the later frame
// first and keeps the default).
FlowField estimate_flow(const Tensor& frame_from, const Tensor& frame_to,
                        const BlockMatchParams& params = {},
                        FlowDirection direction = FlowDirection::Backward);

// Pixel invalid when the fwd/bwd round-trip displacement exceeds tau_occ (in
// pixels) or leaves the frame. Tags must be opposite. The result lives on
// flow_bwd's grid (the later frame).
ValidityMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd, double tau_occ = 1.0);

// f_{k->k-2}(x) = f_{k->k-1}(x) + f_{k-1->k-2}(x + f_{k->k-1}(x)); both inputs
// backward fields of consecutive pairs (outer = later pair). Pixels whose
// intermediate point leaves the frame are marked invalid and get outer flow.
std::pair<FlowField, ValidityMask> compose_backward(const FlowField& outer, const FlowField& inner);

} // namespace davsn::flowwarp
