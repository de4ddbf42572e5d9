#include "pathkernel/model.hpp"

#include <cmath>
#include <string>

#include "pathkernel/error.hpp"
#include "pathkernel/rng.hpp"

namespace pathkernel {

ModelSpec ModelSpec::linear(std::size_t input_dim, bool with_bias) {
    ModelSpec spec;
    spec.kind = ModelKind::Linear;
    spec.layer_sizes = {input_dim};
    spec.activation = Activation::Identity;
    spec.output_activation = Activation::Identity;
    spec.bias = {with_bias};
    return spec;
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> sizes, Activation act, Activation output_act) {
    ModelSpec spec;
    spec.kind = ModelKind::MLP;
    spec.layer_sizes = std::move(sizes);
    spec.activation = act;
    spec.output_activation = output_act;
    spec.bias.assign(spec.layer_sizes.empty() ? 0 : spec.layer_sizes.size() - 1, true);
    return spec;
}

std::size_t ModelSpec::input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }

std::size_t ModelSpec::num_layers() const {
    if (kind == ModelKind::Linear) return 1;
    return layer_sizes.empty() ? 0 : layer_sizes.size() - 1;
}

std::size_t ModelSpec::fan_in(std::size_t layer) const { return layer_sizes[layer]; }

std::size_t ModelSpec::fan_out(std::size_t layer) const {
    return kind == ModelKind::Linear ? 1 : layer_sizes[layer + 1];
}

std::size_t ModelSpec::layer_offset(std::size_t layer) const {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l) offset += (fan_in(l) + (bias[l] ? 1 : 0)) * fan_out(l);
    return offset;
}

void ModelSpec::validate() const {
    if (kind == ModelKind::Linear) {
        if (layer_sizes.size() != 1 || layer_sizes[0] == 0)
            throw ConfigError("linear model needs exactly one positive input dimension");
        if (bias.size() != 1) throw ConfigError("linear model needs exactly one bias flag");
        if (activation != Activation::Identity || output_activation != Activation::Identity)
            throw ConfigError("linear model cannot have an activation");
        return;
    }
    if (layer_sizes.size() < 2) throw ConfigError("mlp needs at least an input and an output size");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ConfigError("mlp layer sizes must be positive");
    if (layer_sizes.back() != 1) throw ConfigError("mlp output dimension must be 1");
    if (bias.size() != layer_sizes.size() - 1)
        throw ConfigError("mlp needs one bias flag per weight layer (" +
                          std::to_string(layer_sizes.size() - 1) + "), got " +
                          std::to_string(bias.size()));
}

std::size_t param_count(const ModelSpec& spec) { return spec.layer_offset(spec.num_layers()); }

double activate(Activation act, double z) {
    switch (act) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Identity: return z;
    }
    return z;
}

double activate_derivative(Activation act, double z) {
    switch (act) {
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        // subgradient 0 at exactly zero
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "?";
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Linear ? "linear" : "mlp"; }

void check_params(const ModelSpec& spec, std::span<const double> w) {
    const std::size_t d = param_count(spec);
    if (w.size() != d)
        throw DimensionError("parameter vector has length " + std::to_string(w.size()) +
                                 ", model expects " + std::to_string(d),
                             -1);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t begin = spec.layer_offset(l);
        const std::size_t end = spec.layer_offset(l + 1);
        for (std::size_t j = begin; j < end; ++j)
            if (!std::isfinite(w[j]))
                throw ConfigError("layer " + std::to_string(l) + ": non-finite parameter at index " +
                                  std::to_string(j));
    }
}

void check_data(const ModelSpec& spec, std::span<const DataPoint> data) {
    for (const auto& p : data) {
        if (p.x.size() != spec.input_dim())
            throw DimensionError("layer 0: data point " + std::to_string(p.index) + " has " +
                                     std::to_string(p.x.size()) + " features, model expects " +
                                     std::to_string(spec.input_dim()),
                                 0);
        for (double v : p.x)
            if (!std::isfinite(v))
                throw ConfigError("data point " + std::to_string(p.index) + " has a non-finite feature");
        if (!std::isfinite(p.y_star))
            throw ConfigError("data point " + std::to_string(p.index) + " has a non-finite target");
    }
}

namespace {

void check_shapes(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    if (x.size() != spec.input_dim())
        throw DimensionError("layer 0: input has length " + std::to_string(x.size()) +
                                 ", expected " + std::to_string(spec.input_dim()),
                             0);
    if (w.size() != param_count(spec))
        throw DimensionError("parameter vector has length " + std::to_string(w.size()) +
                                 ", model expects " + std::to_string(param_count(spec)),
                             -1);
}

Activation layer_activation(const ModelSpec& spec, std::size_t layer) {
    return layer + 1 == spec.num_layers() ? spec.output_activation : spec.activation;
}

/// Forward tape: inputs[l] feeds layer l, pre[l] holds its pre-activations.
struct Tape {
    std::vector<Vector> inputs;
    std::vector<Vector> pre;
    double output = 0.0;
};

Tape forward(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    const std::size_t layers = spec.num_layers();
    Tape tape;
    tape.inputs.reserve(layers);
    tape.pre.reserve(layers);
    Vector a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = spec.fan_in(l);
        const std::size_t out = spec.fan_out(l);
        const double* W = w.data() + spec.layer_offset(l);
        const double* b = W + in * out;
        Vector z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += W[o * in + i] * a[i];
            if (spec.bias[l]) acc += b[o];
            z[o] = acc;
        }
        const Activation act = layer_activation(spec, l);
        Vector next(out);
        for (std::size_t o = 0; o < out; ++o) next[o] = activate(act, z[o]);
        tape.inputs.push_back(std::move(a));
        tape.pre.push_back(std::move(z));
        a = std::move(next);
    }
    tape.output = a[0];
    return tape;
}

}  // namespace

double eval(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    check_shapes(spec, w, x);
    return forward(spec, w, x).output;
}

EvalGrad eval_and_grad(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    check_shapes(spec, w, x);
    const Tape tape = forward(spec, w, x);
    EvalGrad result;
    result.value = tape.output;
    result.grad.assign(w.size(), 0.0);

    const std::size_t layers = spec.num_layers();
    // delta[o] = dy / dz_l[o]
    Vector delta{activate_derivative(spec.output_activation, tape.pre[layers - 1][0])};
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = spec.fan_in(l);
        const std::size_t out = spec.fan_out(l);
        const std::size_t offset = spec.layer_offset(l);
        const double* W = w.data() + offset;
        double* gW = result.grad.data() + offset;
        const Vector& a = tape.inputs[l];
        for (std::size_t o = 0; o < out; ++o)
            for (std::size_t i = 0; i < in; ++i) gW[o * in + i] = delta[o] * a[i];
        if (spec.bias[l])
            for (std::size_t o = 0; o < out; ++o) gW[in * out + o] = delta[o];
        if (l == 0) break;
        Vector prev(in, 0.0);
        for (std::size_t o = 0; o < out; ++o)
            for (std::size_t i = 0; i < in; ++i) prev[i] += W[o * in + i] * delta[o];
        for (std::size_t i = 0; i < in; ++i)
            prev[i] *= activate_derivative(spec.activation, tape.pre[l - 1][i]);
        delta = std::move(prev);
    }
    return result;
}

ParamVector grad_params(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    return eval_and_grad(spec, w, x).grad;
}

ParamVector init_params(const ModelSpec& spec, InitScheme scheme, std::uint64_t seed) {
    ParamVector w(param_count(spec), 0.0);
    if (scheme == InitScheme::Zero) return w;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
        const std::size_t begin = spec.layer_offset(l);
        const std::size_t end = spec.layer_offset(l + 1);
        for (std::size_t j = begin; j < end; ++j) w[j] = scale * (2.0 * detail::uniform01(rng) - 1.0);
    }
    return w;
}

}  // namespace pathkernel
