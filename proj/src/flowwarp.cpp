#include "davsn/flowwarp.h"

#include <algorithm>
#include <cmath>

#include "davsn/autodiff.h"

namespace davsn::flowwarp {

FlowField FlowField::constant(int h, int w, double dx, double dy, FlowDirection dir) {
    FlowField f{Tensor({2, h, w}), dir};
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < hw; ++i) {
        f.data[i] = dx;
        f.data[hw + i] = dy;
    }
    return f;
}

std::pair<Tensor, ValidityMask> backward_warp(const Tensor& map, const FlowField& flow) {
    if (flow.direction != FlowDirection::Backward)
        throw NumericError("backward_warp requires a backward-direction flow field");
    if (map.ndim() != 3) throw NumericError("backward_warp map must be [C,H,W]");
    if (map.dim(1) != flow.height() || map.dim(2) != flow.width())
        throw NumericError("backward_warp: map " + map.shape_str() + " vs flow " +
                           flow.data.shape_str());
    const double fill = 1.0 / static_cast<double>(map.dim(0));
    ad::Graph g;
    ValidityMask vm;
    ad::Var out = ad::warp_bilinear(g.constant(map), flow.data, fill, &vm.m);
    return {out.val(), std::move(vm)};
}

std::pair<LabelMap, ValidityMask> backward_warp_labels(const LabelMap& labels, const FlowField& flow,
                                                       uint8_t fill_label) {
    if (flow.direction != FlowDirection::Backward)
        throw NumericError("backward_warp_labels requires a backward-direction flow field");
    const int H = labels.height, W = labels.width;
    if (H != flow.height() || W != flow.width()) throw NumericError("backward_warp_labels shape mismatch");
    LabelMap out(H, W, fill_label);
    ValidityMask vm;
    vm.m = ByteMask(H, W, 0);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int64_t p = static_cast<int64_t>(y) * W + x;
            const double sx = x + flow.data[p];
            const double sy = y + flow.data[hw + p];
            const int rx = static_cast<int>(std::lround(sx));
            const int ry = static_cast<int>(std::lround(sy));
            if (rx < 0 || rx >= W || ry < 0 || ry >= H) continue;
            out.at(y, x) = labels.at(ry, rx);
            vm.m.at(y, x) = 1;
        }
    return {std::move(out), std::move(vm)};
}

FlowField estimate_flow(const Tensor& frame_from, const Tensor& frame_to, const BlockMatchParams& params,
                        FlowDirection direction) {
    if (frame_from.ndim() != 3 || frame_to.ndim() != 3 || !frame_from.same_shape(frame_to))
        throw NumericError("estimate_flow frames must share [C,H,W] shape");
    const int C = frame_from.dim(0), H = frame_from.dim(1), W = frame_from.dim(2);
    if (params.patch < 1 || params.patch % 2 == 0) throw NumericError("estimate_flow patch must be odd and >= 1");
    if (H < params.patch || W < params.patch)
        throw DataError("estimate_flow: frames smaller than the matching patch");
    const int hp = params.patch / 2;
    const int R = params.radius;
    const int64_t hw = static_cast<int64_t>(H) * W;

    // Offsets ordered by squared distance (zero first), then (dy,dx); the
    // search accepts strictly smaller cost only, so ties go to the earlier =
    // smaller displacement.
    struct Off {
        int dx, dy, d2;
    };
    std::vector<Off> offsets;
    offsets.reserve(static_cast<size_t>((2 * R + 1) * (2 * R + 1)));
    for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) offsets.push_back({dx, dy, dx * dx + dy * dy});
    std::stable_sort(offsets.begin(), offsets.end(), [](const Off& a, const Off& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.dy != b.dy) return a.dy < b.dy;
        return a.dx < b.dx;
    });

    FlowField out = FlowField::zero(H, W, direction);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            // window clipped to the frame around (x,y)
            const int wy0 = std::max(0, y - hp), wy1 = std::min(H - 1, y + hp);
            const int wx0 = std::max(0, x - hp), wx1 = std::min(W - 1, x + hp);
            double best = 0.0;
            int bdx = 0, bdy = 0;
            bool first = true;
            for (const Off& o : offsets) {
                if (wy0 + o.dy < 0 || wy1 + o.dy >= H || wx0 + o.dx < 0 || wx1 + o.dx >= W) continue;
                double cost = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double* a = frame_from.data() + c * hw;
                    const double* b = frame_to.data() + c * hw;
                    for (int yy = wy0; yy <= wy1; ++yy) {
                        const double* ar = a + static_cast<int64_t>(yy) * W;
                        const double* br = b + static_cast<int64_t>(yy + o.dy) * W + o.dx;
                        for (int xx = wx0; xx <= wx1; ++xx) cost += std::fabs(ar[xx] - br[xx]);
                    }
                    if (!first && cost >= best) break;
                }
                if (first || cost < best) {
                    best = cost;
                    bdx = o.dx;
                    bdy = o.dy;
                    first = false;
                }
            }
            out.data[static_cast<int64_t>(y) * W + x] = bdx;
            out.data[hw + static_cast<int64_t>(y) * W + x] = bdy;
        }
    }
    return out;
}

namespace {

// Bilinear sample of one flow channel; caller guarantees in-bounds.
inline double sample_flow(const Tensor& flow, int chan, double sx, double sy) {
    const int H = flow.dim(1), W = flow.dim(2);
    const int64_t hw = static_cast<int64_t>(H) * W;
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    if (x0 >= W - 1) x0 = std::max(0, W - 2);
    if (y0 >= H - 1) y0 = std::max(0, H - 2);
    const double fx = sx - x0, fy = sy - y0;
    const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
    const double* b = flow.data() + chan * hw;
    const double v00 = b[static_cast<int64_t>(y0) * W + x0];
    const double v01 = b[static_cast<int64_t>(y0) * W + x1];
    const double v10 = b[static_cast<int64_t>(y1) * W + x0];
    const double v11 = b[static_cast<int64_t>(y1) * W + x1];
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

} // namespace

ValidityMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd, double tau_occ) {
    if (flow_fwd.direction == flow_bwd.direction)
        throw NumericError("occlusion_mask needs flows of opposite directions");
    if (!flow_fwd.data.same_shape(flow_bwd.data)) throw NumericError("occlusion_mask shape mismatch");
    const int H = flow_bwd.height(), W = flow_bwd.width();
    const int64_t hw = static_cast<int64_t>(H) * W;
    ValidityMask vm;
    vm.m = ByteMask(H, W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int64_t p = static_cast<int64_t>(y) * W + x;
            const double bx = flow_bwd.data[p], by = flow_bwd.data[hw + p];
            const double sx = x + bx, sy = y + by;
            if (sx < 0.0 || sx > W - 1.0 || sy < 0.0 || sy > H - 1.0) continue;
            const double fx = sample_flow(flow_fwd.data, 0, sx, sy);
            const double fy = sample_flow(flow_fwd.data, 1, sx, sy);
            const double rx = bx + fx, ry = by + fy;
            if (std::sqrt(rx * rx + ry * ry) <= tau_occ) vm.m.at(y, x) = 1;
        }
    return vm;
}

std::pair<FlowField, ValidityMask> compose_backward(const FlowField& outer, const FlowField& inner) {
    if (outer.direction != FlowDirection::Backward || inner.direction != FlowDirection::Backward)
        throw NumericError("compose_backward expects two backward fields");
    if (!outer.data.same_shape(inner.data)) throw NumericError("compose_backward shape mismatch");
    const int H = outer.height(), W = outer.width();
    const int64_t hw = static_cast<int64_t>(H) * W;
    FlowField out = FlowField::zero(H, W, FlowDirection::Backward);
    ValidityMask vm;
    vm.m = ByteMask(H, W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int64_t p = static_cast<int64_t>(y) * W + x;
            const double ox = outer.data[p], oy = outer.data[hw + p];
            const double mx = x + ox, my = y + oy;
            out.data[p] = ox;
            out.data[hw + p] = oy;
            if (mx < 0.0 || mx > W - 1.0 || my < 0.0 || my > H - 1.0) continue;
            out.data[p] = ox + sample_flow(inner.data, 0, mx, my);
            out.data[hw + p] = oy + sample_flow(inner.data, 1, mx, my);
            vm.m.at(y, x) = 1;
        }
    return {std::move(out), std::move(vm)};
}

} // namespace davsn::flowwarp
