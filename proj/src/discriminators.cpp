#include "davsn/discriminators.h"

#include <cmath>

#include "davsn/rng.h"

namespace davsn::disc {

void DiscConfig::validate() const {
    if (input_channels < 1) throw DataError("disc config: input_channels >= 1 required");
    if (base_channels < 1) throw DataError("disc config: base_channels >= 1 required");
    if (num_layers < 2) throw DataError("disc config: num_layers >= 2 required");
    if (stride < 1 || kernel < 1) throw DataError("disc config: bad kernel/stride");
}

int DiscConfig::layer_in_channels(int j) const {
    if (j < 1 || j > num_layers) throw DataError("disc layer index out of range");
    if (j == 1) return input_channels;
    return base_channels << (j - 2);
}

int DiscConfig::layer_out_channels(int j) const {
    if (j < 1 || j > num_layers) throw DataError("disc layer index out of range");
    if (j == num_layers) return 1;
    return base_channels << (j - 1);
}

bool DiscParams::all_finite() const {
    for (const auto& t : weights)
        if (!t.all_finite()) return false;
    for (const auto& t : biases)
        if (!t.all_finite()) return false;
    return true;
}

DiscParams init_disc(const DiscConfig& config, uint64_t seed) {
    config.validate();
    DiscParams dp;
    dp.config = config;
    Rng rng(seed);
    for (int j = 1; j <= config.num_layers; ++j) {
        const int cin = config.layer_in_channels(j);
        const int cout = config.layer_out_channels(j);
        const double s = 1.0 / std::sqrt(static_cast<double>(cin) * config.kernel * config.kernel);
        Tensor w({cout, cin, config.kernel, config.kernel});
        for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-s, s);
        dp.weights.push_back(std::move(w));
        dp.biases.push_back(Tensor({cout}));
    }
    return dp;
}

BoundDisc bind(ad::Graph& g, const DiscParams& dp, bool requires_grad) {
    BoundDisc bd;
    bd.dp = &dp;
    for (const auto& w : dp.weights) bd.w.push_back(g.leaf(w, requires_grad));
    for (const auto& b : dp.biases) bd.b.push_back(g.leaf(b, requires_grad));
    return bd;
}

ad::Var disc_response_graph(ad::Graph& g, const BoundDisc& bd, ad::Var input) {
    (void)g;
    const DiscConfig& c = bd.dp->config;
    if (input.val().ndim() != 3 || input.val().dim(0) != c.input_channels)
        throw NumericError("discriminator channel mismatch: input " + input.val().shape_str() +
                           ", expected " + std::to_string(c.input_channels) + " channels");
    ad::Var x = input;
    const int pad = c.kernel > 2 ? 1 : 0;
    for (int j = 1; j <= c.num_layers; ++j) {
        x = ad::conv2d(x, bd.w[static_cast<size_t>(j - 1)], bd.b[static_cast<size_t>(j - 1)], c.stride, pad);
        if (!x.val().all_finite())
            throw NumericError("non-finite activations in discriminator layer " + std::to_string(j));
        if (j < c.num_layers) x = ad::leaky_relu(x, c.leaky_slope);
    }
    return x;
}

ad::Var disc_logit_graph(ad::Graph& g, const BoundDisc& bd, ad::Var input) {
    return ad::global_avg_pool_scalar(disc_response_graph(g, bd, input));
}

double disc_forward(const DiscParams& dp, const Tensor& input) {
    ad::Graph g;
    BoundDisc bd = bind(g, dp, false);
    ad::Var logit = disc_logit_graph(g, bd, g.constant(input));
    const double s = logit.scalar();
    double sig;
    if (s >= 0.0) {
        sig = 1.0 / (1.0 + std::exp(-s));
    } else {
        const double e = std::exp(s);
        sig = e / (1.0 + e);
    }
    // keep the open-interval contract even for saturated logits
    return std::min(std::max(sig, 1e-12), 1.0 - 1e-12);
}

std::vector<double> flatten_layer_weights(const DiscParams& dp, int j) {
    if (j < 1 || j > static_cast<int>(dp.weights.size()))
        throw DataError("flatten_layer_weights: layer " + std::to_string(j) + " out of range [1, " +
                        std::to_string(dp.weights.size()) + "]");
    const Tensor& w = dp.weights[static_cast<size_t>(j - 1)];
    std::vector<double> v(static_cast<size_t>(w.size()));
    for (int64_t i = 0; i < w.size(); ++i) v[static_cast<size_t>(i)] = w[i];
    return v;
}

int shared_layer_count(const DiscConfig& config) { return config.num_layers - 1; }

} // namespace davsn::disc
