#pragma once

// Multiple-input operator network.
//
//   out(y) = sum_j prod_i branch_i(v_i)_j * trunk(y)_j  (+ optional scalar bias)
//
// Every network is a plain MLP whose last layer is affine (no activation).
// All parameters live in one flat vector; `layout()` names each slice.
// Gradients are hand-derived reverse mode for exactly this architecture.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/rng.hpp"

namespace vmionet {

enum class Activation { ReLU, Identity };

struct MLPSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::ReLU;
    bool bias = true;
    bool linear_only = false;

    /// Single bias-free linear map, in -> out.
    static MLPSpec linear(std::size_t in, std::size_t out) {
        return {{in, out}, Activation::Identity, false, true};
    }

    static MLPSpec relu(std::vector<std::size_t> sizes) {
        return {std::move(sizes), Activation::ReLU, true, false};
    }

    [[nodiscard]] std::size_t input_width() const { return layer_sizes.front(); }
    [[nodiscard]] std::size_t output_width() const { return layer_sizes.back(); }
    [[nodiscard]] std::size_t layer_count() const { return layer_sizes.size() - 1; }
};

inline void validate(const MLPSpec& s) {
    if (s.layer_sizes.size() < 2) throw InvalidArgument("MLP needs at least two layer sizes");
    for (auto n : s.layer_sizes)
        if (n == 0) throw InvalidArgument("MLP layer sizes must be positive");
    if (s.linear_only && (s.layer_sizes.size() != 2 || s.bias))
        throw InvalidArgument("linear_only MLP must be a single bias-free layer");
}

struct MIONetSpec {
    std::vector<MLPSpec> branches;
    MLPSpec trunk;
    bool output_bias = false;
};

/// One named slice of the flat parameter vector. Weights are stored
/// column-major as a rows x cols matrix (rows = fan-out).
struct ParamSlot {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] std::size_t size() const { return rows * cols; }
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

struct LayerRef {
    std::size_t weight;  // index into layout
    std::ptrdiff_t bias;  // -1 when absent
    bool activate;        // ReLU after this layer
};

struct NetCache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
};

}  // namespace detail

struct ForwardCache {
    std::vector<detail::NetCache> branches;
    detail::NetCache trunk;
    std::vector<Matrix> branch_out;  // p x B each
    Matrix product;                  // p x B
    Matrix trunk_out;                // p x M
};

class MIONetModel {
public:
    MIONetModel() = default;

    /// Build the layout and initialize parameters (He-uniform before ReLU,
    /// Glorot-uniform elsewhere, zero biases).
    MIONetModel(MIONetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        build_layout();
        initialize(seed);
    }

    [[nodiscard]] const MIONetSpec& spec() const { return spec_; }
    [[nodiscard]] std::size_t rank() const { return rank_; }
    [[nodiscard]] const std::vector<ParamSlot>& layout() const { return layout_; }
    [[nodiscard]] std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
    [[nodiscard]] const Vector& parameters() const { return params_; }
    Vector& parameters() { return params_; }

    void set_parameters(const Vector& p) {
        if (p.size() != params_.size()) throw InvalidArgument("parameter vector length mismatch");
        params_ = p;
    }

    [[nodiscard]] std::size_t branch_count() const { return spec_.branches.size(); }

    /// Batched forward pass.
    /// inputs[i]: in_i x B (one column per task); y: 2 x M disk points.
    /// Returns B x M.
    [[nodiscard]] Matrix forward(const std::vector<Matrix>& inputs, const Matrix& y,
                                 ForwardCache* cache = nullptr) const {
        check_inputs(inputs, y);
        ForwardCache local;
        ForwardCache& c = cache ? *cache : local;
        c.branches.resize(spec_.branches.size());
        c.branch_out.resize(spec_.branches.size());
        for (std::size_t i = 0; i < spec_.branches.size(); ++i)
            c.branch_out[i] = run_net(branch_layers_[i], inputs[i], c.branches[i]);
        c.product = c.branch_out[0];
        for (std::size_t i = 1; i < c.branch_out.size(); ++i)
            c.product.array() *= c.branch_out[i].array();
        c.trunk_out = run_net(trunk_layers_, y, c.trunk);
        Matrix out = c.product.transpose() * c.trunk_out;
        if (spec_.output_bias) out.array() += params_(static_cast<Eigen::Index>(layout_.back().offset));
        return out;
    }

    /// Gradient of sum(upstream .* out) with respect to all parameters, using
    /// the cache filled by forward().
    [[nodiscard]] Vector backward(const ForwardCache& c, const Matrix& upstream) const {
        if (upstream.rows() != c.product.cols() || upstream.cols() != c.trunk_out.cols())
            throw InvalidArgument("upstream gradient shape mismatch");
        Vector grad = Vector::Zero(params_.size());
        const Matrix d_product = c.trunk_out * upstream.transpose();  // p x B
        const Matrix d_trunk = c.product * upstream;                  // p x M
        for (std::size_t i = 0; i < c.branch_out.size(); ++i) {
            Matrix d_branch = d_product;
            for (std::size_t k = 0; k < c.branch_out.size(); ++k)
                if (k != i) d_branch.array() *= c.branch_out[k].array();
            backprop_net(branch_layers_[i], c.branches[i], d_branch, grad);
        }
        backprop_net(trunk_layers_, c.trunk, d_trunk, grad);
        if (spec_.output_bias) grad(static_cast<Eigen::Index>(layout_.back().offset)) = upstream.sum();
        return grad;
    }

    /// Single-task convenience: one vector per branch, output at each point.
    [[nodiscard]] std::vector<double> forward(const std::vector<std::vector<double>>& inputs,
                                              std::span<const Point2> y) const {
        std::vector<Matrix> cols;
        for (const auto& v : inputs)
            cols.emplace_back(Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
        const Matrix out = forward(cols, points_matrix(y));
        return {out.data(), out.data() + out.size()};
    }

    static Matrix points_matrix(std::span<const Point2> y) {
        Matrix m(2, static_cast<Eigen::Index>(y.size()));
        for (std::size_t j = 0; j < y.size(); ++j) {
            m(0, static_cast<Eigen::Index>(j)) = y[j].x;
            m(1, static_cast<Eigen::Index>(j)) = y[j].y;
        }
        return m;
    }

    [[nodiscard]] Eigen::Map<const Matrix> weight(std::size_t slot) const {
        const auto& s = layout_[slot];
        return {params_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                static_cast<Eigen::Index>(s.cols)};
    }

    /// Analytic count: sum over layers of in*out + bias*out (+1 output bias).
    static std::size_t analytic_parameter_count(const MIONetSpec& spec) {
        std::size_t n = 0;
        auto add = [&](const MLPSpec& s) {
            for (std::size_t l = 0; l + 1 < s.layer_sizes.size(); ++l)
                n += s.layer_sizes[l] * s.layer_sizes[l + 1] + (s.bias ? s.layer_sizes[l + 1] : 0);
        };
        for (const auto& b : spec.branches) add(b);
        add(spec.trunk);
        return n + (spec.output_bias ? 1 : 0);
    }

private:
    void build_layout() {
        if (spec_.branches.empty()) throw InvalidArgument("MIONet needs at least one branch");
        for (const auto& b : spec_.branches) validate(b);
        validate(spec_.trunk);
        if (spec_.trunk.input_width() != 2) throw InvalidArgument("trunk input width must be 2");
        rank_ = spec_.trunk.output_width();
        for (const auto& b : spec_.branches)
            if (b.output_width() != rank_)
                throw InvalidArgument("branch output widths must equal the trunk output width");

        layout_.clear();
        std::size_t offset = 0;
        auto add_net = [&](const MLPSpec& s, const std::string& prefix) {
            std::vector<detail::LayerRef> layers;
            for (std::size_t l = 0; l < s.layer_count(); ++l) {
                const std::string base = prefix + ".layer" + std::to_string(l);
                detail::LayerRef ref{layout_.size(), -1,
                                     s.activation == Activation::ReLU && l + 1 < s.layer_count()};
                layout_.push_back({base + ".weight", offset, s.layer_sizes[l + 1], s.layer_sizes[l]});
                offset += layout_.back().size();
                if (s.bias) {
                    ref.bias = static_cast<std::ptrdiff_t>(layout_.size());
                    layout_.push_back({base + ".bias", offset, s.layer_sizes[l + 1], 1});
                    offset += layout_.back().size();
                }
                layers.push_back(ref);
            }
            return layers;
        };
        branch_layers_.clear();
        for (std::size_t i = 0; i < spec_.branches.size(); ++i)
            branch_layers_.push_back(add_net(spec_.branches[i], "branch" + std::to_string(i)));
        trunk_layers_ = add_net(spec_.trunk, "trunk");
        if (spec_.output_bias) {
            layout_.push_back({"output.bias", offset, 1, 1});
            offset += 1;
        }
        params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
    }

    void initialize(std::uint64_t seed) {
        auto init_net = [&](const std::vector<detail::LayerRef>& layers, std::uint64_t net_index) {
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const auto& slot = layout_[layers[l].weight];
                const double fan_in = static_cast<double>(slot.cols);
                const double fan_out = static_cast<double>(slot.rows);
                const double limit = layers[l].activate ? std::sqrt(6.0 / fan_in)
                                                        : std::sqrt(6.0 / (fan_in + fan_out));
                RandomStream rng(seed, net_index * 1000 + l, "init");
                for (std::size_t k = 0; k < slot.size(); ++k)
                    params_(static_cast<Eigen::Index>(slot.offset + k)) = rng.uniform(-limit, limit);
            }
        };
        for (std::size_t i = 0; i < branch_layers_.size(); ++i) init_net(branch_layers_[i], i);
        init_net(trunk_layers_, branch_layers_.size());
    }

    void check_inputs(const std::vector<Matrix>& inputs, const Matrix& y) const {
        if (inputs.size() != spec_.branches.size())
            throw InvalidArgument("number of branch inputs does not match the model");
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (static_cast<std::size_t>(inputs[i].rows()) != spec_.branches[i].input_width())
                throw InvalidArgument("branch " + std::to_string(i) + " input width mismatch");
            if (inputs[i].cols() != inputs[0].cols())
                throw InvalidArgument("branch inputs disagree on batch size");
        }
        if (y.rows() != 2) throw InvalidArgument("trunk points must be 2 x M");
    }

    Matrix run_net(const std::vector<detail::LayerRef>& layers, const Matrix& x,
                   detail::NetCache& cache) const {
        cache.inputs.resize(layers.size());
        cache.pre.resize(layers.size());
        Matrix a = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            cache.inputs[l] = a;
            Matrix z = weight(layers[l].weight) * a;
            if (layers[l].bias >= 0) z.colwise() += bias_vector(static_cast<std::size_t>(layers[l].bias));
            if (layers[l].activate) {
                cache.pre[l] = z;
                a = z.cwiseMax(0.0);
            } else {
                cache.pre[l].resize(0, 0);
                a = std::move(z);
            }
        }
        return a;
    }

    void backprop_net(const std::vector<detail::LayerRef>& layers, const detail::NetCache& cache,
                      Matrix d_out, Vector& grad) const {
        for (std::size_t l = layers.size(); l-- > 0;) {
            if (layers[l].activate) {
                // ReLU subgradient is 0 at exactly 0.
                d_out = (cache.pre[l].array() > 0.0).select(d_out, 0.0);
            }
            const auto& ws = layout_[layers[l].weight];
            Eigen::Map<Matrix> dw(grad.data() + ws.offset, static_cast<Eigen::Index>(ws.rows),
                                  static_cast<Eigen::Index>(ws.cols));
            dw.noalias() += d_out * cache.inputs[l].transpose();
            if (layers[l].bias >= 0) {
                const auto& bs = layout_[static_cast<std::size_t>(layers[l].bias)];
                Eigen::Map<Vector> db(grad.data() + bs.offset, static_cast<Eigen::Index>(bs.rows));
                db += d_out.rowwise().sum();
            }
            if (l > 0) d_out = weight(layers[l].weight).transpose() * d_out;
        }
    }

    [[nodiscard]] Eigen::Map<const Vector> bias_vector(std::size_t slot) const {
        const auto& s = layout_[slot];
        return {params_.data() + s.offset, static_cast<Eigen::Index>(s.rows)};
    }

    MIONetSpec spec_;
    std::size_t rank_ = 0;
    std::vector<ParamSlot> layout_;
    std::vector<std::vector<detail::LayerRef>> branch_layers_;
    std::vector<detail::LayerRef> trunk_layers_;
    Vector params_;
};

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw InvalidArgument("mse_loss: length mismatch");
    if (pred.empty()) throw InvalidArgument("mse_loss: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

inline double mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw InvalidArgument("mse_loss: shape mismatch");
    return mse_loss(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                    std::span<const double>(target.data(), static_cast<std::size_t>(target.size())));
}

struct AdamState {
    Vector first_moment;
    Vector second_moment;
    std::int64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_size(std::size_t n, double lr = 1e-3) {
        AdamState s;
        s.first_moment = Vector::Zero(static_cast<Eigen::Index>(n));
        s.second_moment = Vector::Zero(static_cast<Eigen::Index>(n));
        s.lr = lr;
        return s;
    }
};

/// One Adam update with bias correction.
inline void adam_step(Vector& params, const Vector& grads, AdamState& st) {
    if (grads.size() != params.size() || st.first_moment.size() != params.size() ||
        st.second_moment.size() != params.size())
        throw InvalidArgument("adam_step: shape mismatch");
    if (!grads.allFinite()) throw NumericalFailure("divergence");
    ++st.step_count;
    const double t = static_cast<double>(st.step_count);
    const double c1 = 1.0 - std::pow(st.beta1, t);
    const double c2 = 1.0 - std::pow(st.beta2, t);
    st.first_moment = st.beta1 * st.first_moment + (1.0 - st.beta1) * grads;
    st.second_moment = st.beta2 * st.second_moment + (1.0 - st.beta2) * grads.cwiseAbs2();
    params.array() -= st.lr * (st.first_moment.array() / c1) /
                      ((st.second_moment.array() / c2).sqrt() + st.eps);
}

}  // namespace vmionet
