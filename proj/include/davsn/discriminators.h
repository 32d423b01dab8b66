#pragma once

#include <vector>

#include "davsn/autodiff.h"

namespace davsn::disc {

// DCGAN-style stack of strided convolutions with leaky activations. The last
// layer maps to a single channel; the spec-level score is its sigmoid'd
// global average. patch_scores keeps the per-cell response map for the
// adversarial losses instead of pooling.
struct DiscConfig {
    int input_channels = 5;   // C for D_s, 2C for D_st
    int base_channels = 8;
    int num_layers = 4;       // J_total, including the final 1-channel conv
    int stride = 2;
    int kernel = 4;
    double leaky_slope = 0.2;
    bool patch_scores = false;

    void validate() const;
    int layer_in_channels(int j) const;   // j in [1, num_layers]
    int layer_out_channels(int j) const;
};

struct DiscParams {
    DiscConfig config;
    std::vector<Tensor> weights;  // OIHW per layer
    std::vector<Tensor> biases;

    bool all_finite() const;
};

DiscParams init_disc(const DiscConfig& config, uint64_t seed);

struct BoundDisc {
    const DiscParams* dp = nullptr;
    std::vector<ad::Var> w, b;
};

BoundDisc bind(ad::Graph& g, const DiscParams& dp, bool requires_grad);

// Pre-sigmoid response map [1,h,w] (single cell when the input is small).
ad::Var disc_response_graph(ad::Graph& g, const BoundDisc& bd, ad::Var input);
// Pre-sigmoid pooled scalar.
ad::Var disc_logit_graph(ad::Graph& g, const BoundDisc& bd, ad::Var input);

// score in (0,1): sigmoid of the globally pooled response.
double disc_forward(const DiscParams& dp, const Tensor& input);

// Row-major flattening of layer j's filters (1-based, biases excluded).
std::vector<double> flatten_layer_weights(const DiscParams& dp, int j);

// Layers with shapes shared between a C-input and a 2C-input twin: j = 2..J.
int shared_layer_count(const DiscConfig& config);

} // namespace davsn::disc
