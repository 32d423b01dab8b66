#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "davsn/errors.h"

namespace davsn {

// Dense row-major double tensor, up to 4 dims. Channel maps use CHW layout,
// conv filters OIHW. Small and boring on purpose: the autodiff graph, the
// renderer and the losses all speak this one type.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        v_.assign(static_cast<size_t>(count(dims_)), 0.0);
    }
    Tensor(std::vector<int> dims, double fill) : dims_(std::move(dims)) {
        v_.assign(static_cast<size_t>(count(dims_)), fill);
    }

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int> dims, double fill) { return Tensor(std::move(dims), fill); }
    static Tensor scalar(double x) {
        Tensor t({1});
        t.v_[0] = x;
        return t;
    }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(dims_.size()); }
    int64_t size() const { return static_cast<int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

    // CHW accessors.
    double& at(int c, int y, int x) { return v_[static_cast<size_t>((c * dims_[1] + y) * dims_[2] + x)]; }
    double at(int c, int y, int x) const { return v_[static_cast<size_t>((c * dims_[1] + y) * dims_[2] + x)]; }
    // OIHW accessor for filters.
    double& at4(int o, int i, int y, int x) {
        return v_[static_cast<size_t>(((o * dims_[1] + i) * dims_[2] + y) * dims_[3] + x)];
    }
    double at4(int o, int i, int y, int x) const {
        return v_[static_cast<size_t>(((o * dims_[1] + i) * dims_[2] + y) * dims_[3] + x)];
    }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    static int64_t count(const std::vector<int>& dims) {
        int64_t n = dims.empty() ? 0 : 1;
        for (int d : dims) {
            if (d < 0) throw DataError("tensor dimension must be non-negative");
            n *= d;
        }
        return n;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    std::vector<int> dims_;
    std::vector<double> v_;
};

// H×W integer label map, values in [0, C).
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> v;

    LabelMap() = default;
    LabelMap(int h, int w, uint8_t fill = 0) : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
    int64_t size() const { return static_cast<int64_t>(v.size()); }
};

// H×W boolean mask. Semantics are declared by the owner: flowwarp's
// ValidityMask stores 1 = trustworthy, synthdata's occlusion masks store
// 1 = occluded.
struct ByteMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> v;

    ByteMask() = default;
    ByteMask(int h, int w, uint8_t fill = 0) : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
    int64_t count_set() const {
        int64_t n = 0;
        for (uint8_t b : v) n += (b != 0);
        return n;
    }
    int64_t size() const { return static_cast<int64_t>(v.size()); }
};

} // namespace davsn
