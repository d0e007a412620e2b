#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vmionet/error.hpp"
#include "vmionet/mionet.hpp"
#include "vmionet/rng.hpp"

namespace vmionet {

/// Column-per-task view of an encoded dataset.
struct TrainingSet {
    std::vector<Matrix> inputs;  ///< in_i x N per branch
    Matrix trunk_points;         ///< 2 x M, shared by all tasks
    Matrix targets;              ///< N x M

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(targets.rows()); }
};

struct TrainConfig {
    double lr = 1e-3;
    std::size_t iterations = 50000;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::size_t log_interval = 100;
    std::size_t checkpoint_interval = 0;  ///< 0 disables periodic checkpoints
    /// Called at every checkpoint with (model, iteration, last loss).
    std::function<void(const MIONetModel&, std::size_t, double)> on_checkpoint;
};

struct LossRecord {
    std::size_t iteration;
    double loss;
};

struct TrainResult {
    std::vector<LossRecord> history;
    std::size_t iterations = 0;
    double final_loss = 0.0;
};

/// Indices of the minibatch for one iteration; depends only on (seed, iteration).
inline std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch, std::uint64_t seed,
                                             std::size_t iteration) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (batch >= n) return idx;
    RandomStream rng(seed, iteration, "batch");
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(batch);
    return idx;
}

inline std::vector<Matrix> gather_inputs(const TrainingSet& data, std::span<const std::size_t> idx) {
    std::vector<Matrix> out;
    for (const auto& in : data.inputs) {
        Matrix m(in.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t b = 0; b < idx.size(); ++b)
            m.col(static_cast<Eigen::Index>(b)) = in.col(static_cast<Eigen::Index>(idx[b]));
        out.push_back(std::move(m));
    }
    return out;
}

inline Matrix gather_targets(const TrainingSet& data, std::span<const std::size_t> idx) {
    Matrix m(static_cast<Eigen::Index>(idx.size()), data.targets.cols());
    for (std::size_t b = 0; b < idx.size(); ++b)
        m.row(static_cast<Eigen::Index>(b)) = data.targets.row(static_cast<Eigen::Index>(idx[b]));
    return m;
}

/// Loss and gradient of the batch MSE.
inline double loss_and_gradient(const MIONetModel& model, const std::vector<Matrix>& inputs,
                                const Matrix& y, const Matrix& targets, Vector& grad) {
    ForwardCache cache;
    const Matrix out = model.forward(inputs, y, &cache);
    const Matrix diff = out - targets;
    const double n = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / n;
    grad = model.backward(cache, (2.0 / n) * diff);
    return loss;
}

/// Minibatch Adam over tasks; each batch element uses every trunk point of
/// its task. Deterministic given config.seed.
inline TrainResult train(MIONetModel& model, const TrainingSet& data, const TrainConfig& cfg) {
    if (data.size() == 0) throw InvalidArgument("train: empty dataset");
    if (data.inputs.size() != model.branch_count())
        throw InvalidArgument("train: branch count mismatch");
    if (cfg.batch_size == 0) throw InvalidArgument("train: batch size must be positive");

    AdamState adam = AdamState::for_size(model.parameter_count(), cfg.lr);
    TrainResult result;
    Vector last_good = model.parameters();
    std::size_t last_good_iter = 0;
    Vector grad;
    double loss = 0.0;

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        const auto idx = sample_batch(data.size(), cfg.batch_size, cfg.seed, it);
        const auto inputs = gather_inputs(data, idx);
        const Matrix targets = gather_targets(data, idx);
        loss = loss_and_gradient(model, inputs, data.trunk_points, targets, grad);
        if (!std::isfinite(loss) || !grad.allFinite()) {
            model.set_parameters(last_good);
            throw NumericalFailure("non-finite loss at iteration " + std::to_string(it) +
                                   "; parameters restored from iteration " +
                                   std::to_string(last_good_iter));
        }
        adam_step(model.parameters(), grad, adam);
        if (cfg.log_interval > 0 && it % cfg.log_interval == 0) result.history.push_back({it, loss});
        if (cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0) {
            last_good = model.parameters();
            last_good_iter = it;
            if (cfg.on_checkpoint) cfg.on_checkpoint(model, it, loss);
        }
    }
    result.iterations = cfg.iterations;
    result.final_loss = loss;
    return result;
}

}  // namespace vmionet
