#ifndef ONEA_SIM_HPP
#define ONEA_SIM_HPP

//
// Desk-scale continual-learning harness.
//
// A frozen random ReLU projection stands in for the pretrained backbone.
// Each task trains a fresh bottleneck adapter plus a throwaway linear head on
//
//     L = (1 − λ(t))·CE + λ(t)·L_ctr
//
// with λ(t) and the epoch budget set by the task's class count. After each
// task the adapter is folded into the running model according to the chosen
// strategy, prototypes of the new classes are computed with the resulting
// adapter, and every seen task is evaluated with a cosine prototype
// classifier over all seen classes.
//

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onea/adapter.hpp"
#include "onea/counters.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"
#include "onea/merge.hpp"
#include "onea/metrics.hpp"
#include "onea/random.hpp"
#include "onea/stream.hpp"

namespace onea {

// ---------------------------------------------------------------------------
// Configuration and schedules

struct TrainConfig {
    double lr = 0.1;
    int epochs_ref = 10;   ///< E_0
    int epochs_min = 2;    ///< E_min
    int epochs_max = 40;   ///< E_max
    double beta = 0.5;
    double lambda_min = 0.01;
    double lambda_max = 0.1;
    double k_decay = 2.3979;
    double tau_margin = 0.07;
    int batch_size = 32;
    int bottleneck = 16;
    int feature_dim = 128;
    bool cosine_lr = false;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(lr > 0.0))
            throw spec_error("lr: must be > 0");
        if (epochs_ref < 1)
            throw spec_error("E0: must be >= 1");
        if (epochs_min < 0 || epochs_min > epochs_max)
            throw spec_error("E_min/E_max: need 0 <= E_min <= E_max");
        if (!(lambda_min >= 0.0 && lambda_max <= 1.0 && lambda_min <= lambda_max))
            throw spec_error("lambda_min/lambda_max: need 0 <= lambda_min <= lambda_max <= 1");
        if (!(k_decay > 0.0))
            throw spec_error("k_decay: must be > 0");
        if (batch_size < 1)
            throw spec_error("batch_size: must be >= 1");
        if (bottleneck < 1)
            throw spec_error("bottleneck: must be >= 1");
        if (feature_dim < 1)
            throw spec_error("feature_dim: must be >= 1");
    }
};

namespace detail {

inline std::string config_echo(const TrainConfig& cfg)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, " (train seed %llu, lr %g, E0 %d, batch %d, bottleneck %d)",
                  static_cast<unsigned long long>(cfg.seed), cfg.lr, cfg.epochs_ref, cfg.batch_size,
                  cfg.bottleneck);
    return buf;
}

} // namespace detail

/// λ = λ_min + (λ_max − λ_min)·exp(−k·(|Y_t| − 1))
inline double lambda_schedule(std::size_t class_count, const TrainConfig& cfg)
{
    const double c = static_cast<double>(std::max<std::size_t>(class_count, 1));
    return cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * std::exp(-cfg.k_decay * (c - 1.0));
}

/// E(t) = clamp(E_min, E_0·(|Y_t| / t_0)^β, E_max) with t_0 = C/T, rounded to the nearest integer.
inline int epoch_schedule(std::size_t class_count, int total_classes, int num_tasks, const TrainConfig& cfg)
{
    const double t0 = static_cast<double>(total_classes) / static_cast<double>(num_tasks);
    const double raw = cfg.epochs_ref * std::pow(static_cast<double>(class_count) / t0, cfg.beta);
    const auto e = static_cast<int>(std::lround(raw));
    return std::clamp(e, cfg.epochs_min, cfg.epochs_max);
}

// ---------------------------------------------------------------------------
// Backbone

/// Frozen feature extractor h = ReLU(x·P).
struct Backbone {
    Matrix projection;

    Matrix features(const Matrix& x) const { return relu(matmul(x, projection)); }

    std::size_t input_dim() const noexcept { return projection.rows(); }
    std::size_t feature_dim() const noexcept { return projection.cols(); }
};

inline Backbone make_backbone(std::size_t input_dim, std::size_t feature_dim, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, 101));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(input_dim)));
    Backbone b{Matrix(input_dim, feature_dim)};
    for (auto& v : b.projection.data())
        v = normal(rng);
    return b;
}

// ---------------------------------------------------------------------------
// Objective

struct ContrastiveResult {
    double value = 0.0;
    /// No positive and no negative pair in the batch.
    bool degenerate = false;
};

namespace detail {

struct ContrastivePass {
    ContrastiveResult result;
    Matrix grad;  ///< dL/dfeatures, n×d
};

/// Mean over positive pairs of (1 − sim) plus mean over negative pairs of max(0, sim − τ),
/// pairs taken as unordered i < j within the batch.
inline ContrastivePass contrastive_pass(const Matrix& z, std::span<const int> labels, double tau, bool want_grad)
{
    const std::size_t n = z.rows();
    if (labels.size() != n)
        throw dimension_error("contrastive_loss: label count does not match feature rows");
    ContrastivePass out;
    Matrix f = z;
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = std::max(norm2(z.row(i)), 1e-12);
        for (auto& v : f.row(i))
            v /= norms[i];
    }
    const Matrix sim = matmul_nt(f, f);

    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            (labels[i] == labels[j] ? n_pos : n_neg) += 1;
    if (n_pos == 0 && n_neg == 0) {
        out.result.degenerate = true;
        if (want_grad)
            out.grad = Matrix(n, z.cols());
        return out;
    }

    double pos = 0.0, neg = 0.0;
    Matrix dsim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (labels[i] == labels[j]) {
                pos += 1.0 - sim(i, j);
                dsim(i, j) = -1.0 / static_cast<double>(n_pos);
            } else if (sim(i, j) > tau) {
                neg += sim(i, j) - tau;
                dsim(i, j) = 1.0 / static_cast<double>(n_neg);
            }
        }
    }
    out.result.value = (n_pos ? pos / static_cast<double>(n_pos) : 0.0) +
                       (n_neg ? neg / static_cast<double>(n_neg) : 0.0);
    if (!want_grad)
        return out;

    // dL/df_i = Σ_j dsim_ij f_j over both orientations of each pair.
    Matrix sym = dsim + transpose(dsim);
    Matrix df = matmul(sym, f);
    out.grad = Matrix(n, z.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const double radial = dot(f.row(i), df.row(i));
        auto gi = out.grad.row(i);
        auto fi = f.row(i);
        auto dfi = df.row(i);
        for (std::size_t k = 0; k < z.cols(); ++k)
            gi[k] = (dfi[k] - fi[k] * radial) / norms[i];
    }
    return out;
}

} // namespace detail

/// Pairwise margin contrastive loss on ℓ2-normalised rows of `features`.
inline ContrastiveResult contrastive_loss(const Matrix& features, std::span<const int> labels, double tau)
{
    return detail::contrastive_pass(features, labels, tau, false).result;
}

/// Trainable parameters of one task: adapter pair plus local head.
struct LocalModel {
    Matrix w_down;            ///< d×b
    Matrix w_up;              ///< b×d
    Matrix head;              ///< d×c
    std::vector<double> bias; ///< c
};

struct ObjectiveTerms {
    double total = 0.0;
    double ce = 0.0;
    double ctr = 0.0;
    bool ctr_degenerate = false;
};

struct LocalGradients {
    Matrix w_down;
    Matrix w_up;
    Matrix head;
    std::vector<double> bias;
};

/// Loss and reverse-mode gradients of the training objective for one mini-batch.
///
/// `h` holds backbone features, `labels` local class indices in [0, c). With
/// `use_ce` false (single-class task) the objective is the contrastive term alone.
inline std::pair<ObjectiveTerms, LocalGradients> objective(const Matrix& h, std::span<const int> labels,
                                                           const LocalModel& m, double lambda, double tau,
                                                           bool use_ce)
{
    const std::size_t n = h.rows();
    const std::size_t c = m.head.cols();
    if (labels.size() != n || n == 0)
        throw dimension_error("objective: label count does not match batch");

    const Matrix pre = matmul(h, m.w_down);
    const Matrix act = relu(pre);
    Matrix z = h;
    z += matmul(act, m.w_up);

    ObjectiveTerms terms;
    LocalGradients g{Matrix(m.w_down.rows(), m.w_down.cols()), Matrix(m.w_up.rows(), m.w_up.cols()),
                     Matrix(m.head.rows(), m.head.cols()), std::vector<double>(c, 0.0)};

    const double w_ce = use_ce ? 1.0 - lambda : 0.0;
    const double w_ctr = use_ce ? lambda : 1.0;

    Matrix dz(n, z.cols());
    if (use_ce) {
        Matrix logits = matmul(z, m.head);
        Matrix dlogits(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = logits.row(i);
            for (std::size_t k = 0; k < c; ++k)
                row[k] += m.bias[k];
            const double mx = *std::max_element(row.begin(), row.end());
            double sum = 0.0;
            for (double v : row)
                sum += std::exp(v - mx);
            const double lse = mx + std::log(sum);
            const auto y = static_cast<std::size_t>(labels[i]);
            terms.ce += lse - row[y];
            for (std::size_t k = 0; k < c; ++k)
                dlogits(i, k) = (std::exp(row[k] - lse) - (k == y ? 1.0 : 0.0)) / static_cast<double>(n);
        }
        terms.ce /= static_cast<double>(n);
        g.head = matmul_tn(z, dlogits) * w_ce;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k)
                g.bias[k] += w_ce * dlogits(i, k);
        dz += matmul_nt(dlogits, m.head) * w_ce;
    }

    const bool need_ctr = w_ctr != 0.0;
    auto ctr = detail::contrastive_pass(z, labels, tau, need_ctr);
    terms.ctr = ctr.result.value;
    terms.ctr_degenerate = ctr.result.degenerate;
    if (need_ctr)
        dz += ctr.grad * w_ctr;

    terms.total = w_ce * terms.ce + w_ctr * terms.ctr;

    g.w_up = matmul_tn(act, dz);
    Matrix dpre = matmul_nt(dz, m.w_up);
    for (std::size_t k = 0; k < dpre.size(); ++k)
        if (pre.data()[k] <= 0.0)
            dpre.data()[k] = 0.0;
    g.w_down = matmul_tn(h, dpre);
    return {terms, g};
}

// ---------------------------------------------------------------------------
// Training

/// Fresh adapter: W_down uniform in ±1/√d, W_up zero.
inline AdapterModule init_adapter(std::size_t feature_dim, std::size_t bottleneck, std::uint64_t seed)
{
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    std::uniform_real_distribution<double> uni(-bound, bound);
    AdapterModule m;
    m.bottleneck = bottleneck;
    Matrix down(feature_dim, bottleneck);
    for (auto& v : down.data())
        v = uni(rng);
    m.layers.push_back(std::move(down));
    m.layers.emplace_back(bottleneck, feature_dim);
    return m;
}

/// Starting point shared by every task's adapter under a training config.
inline AdapterModule initial_adapter(const TrainConfig& cfg, std::size_t feature_dim)
{
    return init_adapter(feature_dim, static_cast<std::size_t>(cfg.bottleneck), derive_seed(cfg.seed, 201));
}

struct TrainOutcome {
    AdapterModule adapter;
    LocalModel local;          ///< final parameters, head included; callers drop the head
    int epochs = 0;
    double lambda = 0.0;
    double final_loss = 0.0;
    double head_train_accuracy = std::numeric_limits<double>::quiet_NaN();
};

/// Trains an adapter on one task. Starts from `start` when given (continued
/// fine-tuning), otherwise from a fresh initialisation.
inline TrainOutcome train_task(const Task& task, const Backbone& backbone, const TrainConfig& cfg,
                               int total_classes, int num_tasks, const AdapterModule* start = nullptr)
{
    cfg.validate();
    if (task.train.size() == 0)
        throw spec_error("train_task: task " + std::to_string(task.meta.task_id) + " has no training data");

    const std::vector<int> classes(task.meta.class_ids.begin(), task.meta.class_ids.end());
    std::map<int, int> local;
    for (std::size_t k = 0; k < classes.size(); ++k)
        local[classes[k]] = static_cast<int>(k);
    std::vector<int> labels(task.train.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = local.find(task.train.labels[i]);
        if (it == local.end())
            throw spec_error("train_task: sample label outside the task's classes");
        labels[i] = it->second;
    }

    const Matrix h = backbone.features(task.train.x);
    const std::size_t d = backbone.feature_dim();
    const auto b = static_cast<std::size_t>(cfg.bottleneck);

    // Every task starts from the same initialisation, so adapters trained on
    // different tasks are updates of a common starting point.
    AdapterModule adapter = start ? *start : initial_adapter(cfg, d);
    if (adapter.layers.size() != 2 || adapter.down(0).rows() != d)
        throw dimension_error("train_task: adapter does not match backbone width");

    TrainOutcome out;
    out.lambda = lambda_schedule(classes.size(), cfg);
    out.epochs = epoch_schedule(classes.size(), total_classes, num_tasks, cfg);
    const bool use_ce = classes.size() > 1;

    LocalModel m{adapter.layers[0], adapter.layers[1], Matrix(d, classes.size()),
                 std::vector<double>(classes.size(), 0.0)};

    Rng rng(derive_seed(cfg.seed, 202, static_cast<std::uint64_t>(task.meta.task_id)));
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const double pi = std::acos(-1.0);

    for (int epoch = 0; epoch < out.epochs; ++epoch) {
        const double lr = cfg.cosine_lr ? 0.5 * cfg.lr * (1.0 + std::cos(pi * epoch / out.epochs)) : cfg.lr;
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t start_row = 0; start_row < order.size(); start_row += batch) {
            const std::size_t count = std::min(batch, order.size() - start_row);
            const std::span<const std::size_t> idx(order.data() + start_row, count);
            const Matrix hb = select_rows(h, idx);
            std::vector<int> yb(count);
            for (std::size_t k = 0; k < count; ++k)
                yb[k] = labels[idx[k]];

            auto [terms, g] = objective(hb, yb, m, out.lambda, cfg.tau_margin, use_ce);
            if (!std::isfinite(terms.total))
                throw training_error("train_task: non-finite loss on task " + std::to_string(task.meta.task_id) +
                                     detail::config_echo(cfg));
            out.final_loss = terms.total;
            m.w_down -= g.w_down * lr;
            m.w_up -= g.w_up * lr;
            m.head -= g.head * lr;
            for (std::size_t k = 0; k < m.bias.size(); ++k)
                m.bias[k] -= lr * g.bias[k];
        }
        if (!m.w_down.all_finite() || !m.w_up.all_finite())
            throw training_error("train_task: parameters diverged on task " + std::to_string(task.meta.task_id) +
                                 detail::config_echo(cfg));
    }

    if (use_ce) {
        Matrix z = h;
        z += matmul(relu(matmul(h, m.w_down)), m.w_up);
        const Matrix logits = matmul(z, m.head);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < m.bias.size(); ++k)
                if (logits(i, k) + m.bias[k] > logits(i, best) + m.bias[best])
                    best = k;
            correct += best == static_cast<std::size_t>(labels[i]);
        }
        out.head_train_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    }

    adapter.layers[0] = m.w_down;
    adapter.layers[1] = m.w_up;
    adapter.bottleneck = b;
    adapter.meta = task.meta;
    out.adapter = std::move(adapter);
    out.local = std::move(m);
    return out;
}

// ---------------------------------------------------------------------------
// Prototype classifier

struct PrototypeBank {
    std::map<int, std::vector<double>> prototypes;
    std::map<int, std::int64_t> source_task;

    bool empty() const noexcept { return prototypes.empty(); }

    void absorb(const PrototypeBank& other)
    {
        for (const auto& [c, p] : other.prototypes)
            prototypes[c] = p;
        for (const auto& [c, t] : other.source_task)
            source_task[c] = t;
    }
};

/// Adapted features z for raw inputs.
inline Matrix adapted_features(const Matrix& x, const AdapterModule& adapter, const Backbone& backbone)
{
    return adapter_forward(backbone.features(x), adapter);
}

/// p_c = mean adapted feature of the class-c rows of `data`, for each listed class.
inline PrototypeBank compute_prototypes(const AdapterModule& adapter, const Backbone& backbone,
                                        const LabeledSet& data, const std::set<int>& class_ids,
                                        std::int64_t task_id = 0)
{
    const Matrix z = adapted_features(data.x, adapter, backbone);
    PrototypeBank bank;
    std::map<int, std::size_t> counts;
    for (int c : class_ids)
        bank.prototypes[c] = std::vector<double>(z.cols(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto it = bank.prototypes.find(data.labels[i]);
        if (it == bank.prototypes.end())
            continue;
        auto zi = z.row(i);
        for (std::size_t k = 0; k < zi.size(); ++k)
            it->second[k] += zi[k];
        ++counts[data.labels[i]];
    }
    for (auto& [c, p] : bank.prototypes) {
        const std::size_t n = counts[c];
        if (n == 0)
            throw spec_error("compute_prototypes: class " + std::to_string(c) + " has no samples");
        for (auto& v : p)
            v /= static_cast<double>(n);
        if (norm2(p) == 0.0)
            throw numeric_error("compute_prototypes: class " + std::to_string(c) + " has a zero prototype");
        bank.source_task[c] = task_id;
    }
    return bank;
}

namespace detail {

struct Scored {
    int label = -1;
    double score = -std::numeric_limits<double>::infinity();
};

/// Best cosine over the bank for one feature row; ties resolve to the lower class id.
inline void score_row(std::span<const double> z, const PrototypeBank& bank, Scored& best)
{
    const double zn = norm2(z);
    if (!(zn > 0.0))
        throw numeric_error("classify: zero-norm feature");
    for (const auto& [c, p] : bank.prototypes) {
        const double s = dot(z, p) / (zn * norm2(p));
        if (s > best.score || (s == best.score && c < best.label))
            best = {c, s};
    }
}

} // namespace detail

/// Cosine prototype classification of every row of `x` with one adapter.
inline std::vector<int> predict(const Matrix& x, const AdapterModule& adapter, const Backbone& backbone,
                                const PrototypeBank& bank)
{
    if (bank.empty())
        throw spec_error("classify: empty prototype bank");
    const Matrix z = adapted_features(x, adapter, backbone);
    std::vector<int> out(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        detail::Scored best;
        detail::score_row(z.row(i), bank, best);
        out[i] = best.label;
    }
    return out;
}

inline int classify(std::span<const double> x, const AdapterModule& adapter, const Backbone& backbone,
                    const PrototypeBank& bank)
{
    Matrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
    return predict(row, adapter, backbone, bank).front();
}

/// Task-agnostic prediction with one adapter per task: every adapter is run and
/// the highest cosine over all task banks wins.
inline std::vector<int> predict_multi(const Matrix& x, std::span<const AdapterModule> adapters,
                                      std::span<const PrototypeBank> banks, const Backbone& backbone)
{
    if (adapters.size() != banks.size() || adapters.empty())
        throw spec_error("predict_multi: need one non-empty bank per adapter");
    const Matrix h = backbone.features(x);
    std::vector<detail::Scored> best(x.rows());
    for (std::size_t a = 0; a < adapters.size(); ++a) {
        const Matrix z = adapter_forward(h, adapters[a]);
        for (std::size_t i = 0; i < z.rows(); ++i)
            detail::score_row(z.row(i), banks[a], best[i]);
    }
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = best[i].label;
    return out;
}

// ---------------------------------------------------------------------------
// Full sequence

enum class Strategy {
    OneA,
    Average,
    Symmetric,
    PerTaskNoMerge,
    SingleFinetune,
};

inline std::string to_string(Strategy s)
{
    switch (s) {
    case Strategy::OneA:
        return "one-a";
    case Strategy::Average:
        return "average";
    case Strategy::Symmetric:
        return "symmetric";
    case Strategy::PerTaskNoMerge:
        return "per-task";
    case Strategy::SingleFinetune:
        return "single-finetune";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s)
{
    for (Strategy k : {Strategy::OneA, Strategy::Average, Strategy::Symmetric, Strategy::PerTaskNoMerge,
                       Strategy::SingleFinetune})
        if (to_string(k) == s)
            return k;
    throw spec_error("unknown strategy '" + s + "' (expected one-a, average, symmetric, per-task, single-finetune)");
}

/// Final model state of a run, for persistence.
struct RunArtifacts {
    /// The single running adapter, or one adapter per task for per-task runs.
    std::vector<AdapterModule> adapters;
};

inline RunReport run_sequence(const TaskStream& stream, Strategy strategy, const TrainConfig& train_cfg,
                              const MergeConfig& merge_cfg, RunArtifacts* artifacts = nullptr)
{
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    train_cfg.validate();
    merge_cfg.validate();

    const std::size_t T = stream.tasks.size();
    const Backbone backbone = make_backbone(static_cast<std::size_t>(stream.spec.input_dim),
                                            static_cast<std::size_t>(train_cfg.feature_dim), train_cfg.seed);

    RunReport report;
    report.strategy = to_string(strategy);
    report.stream_seed = stream.spec.seed;
    report.train_seed = train_cfg.seed;
    report.acc = empty_accuracy_table(T);

    std::optional<AdapterModule> current;
    std::vector<AdapterModule> per_task;
    std::vector<PrototypeBank> per_task_banks;
    PrototypeBank bank;

    for (std::size_t t = 0; t < T; ++t) {
        const Task& task = stream.tasks[t];
        report.class_counts.push_back(task.meta.class_count());

        const AdapterModule* start =
            strategy == Strategy::SingleFinetune && current ? &*current : nullptr;
        TrainOutcome trained = train_task(task, backbone, train_cfg, stream.spec.total_classes,
                                          static_cast<int>(T), start);

        const auto svd_before = counters().svd_calls;
        const auto merge_start = clock::now();
        switch (strategy) {
        case Strategy::OneA:
            current = merge_modules(trained.adapter, current, merge_cfg);
            break;
        case Strategy::Average:
            current = current ? merge_average(trained.adapter, *current, t) : trained.adapter;
            break;
        case Strategy::Symmetric:
            current = current ? merge_symmetric_modules(trained.adapter, *current, merge_cfg) : trained.adapter;
            break;
        case Strategy::PerTaskNoMerge:
            per_task.push_back(trained.adapter);
            break;
        case Strategy::SingleFinetune:
            current = std::move(trained.adapter);
            break;
        }
        report.merge_ms += std::chrono::duration<double, std::milli>(clock::now() - merge_start).count();
        report.svd_calls += counters().svd_calls - svd_before;

        if (strategy == Strategy::PerTaskNoMerge) {
            per_task_banks.push_back(
                compute_prototypes(per_task.back(), backbone, task.train, task.meta.class_ids, task.meta.task_id));
        } else {
            bank.absorb(compute_prototypes(*current, backbone, task.train, task.meta.class_ids, task.meta.task_id));
        }

        std::size_t seen_correct = 0, seen_total = 0;
        for (std::size_t j = 0; j <= t; ++j) {
            const LabeledSet& test = stream.tasks[j].test;
            if (test.size() == 0)
                continue;
            const auto fwd_before = counters().adapter_forward_rows;
            const std::vector<int> pred = strategy == Strategy::PerTaskNoMerge
                                              ? predict_multi(test.x, per_task, per_task_banks, backbone)
                                              : predict(test.x, *current, backbone, bank);
            report.eval_adapter_forwards += counters().adapter_forward_rows - fwd_before;
            report.eval_samples += test.size();
            std::size_t correct = 0;
            for (std::size_t i = 0; i < pred.size(); ++i)
                correct += pred[i] == test.labels[i];
            report.acc[j][t] = static_cast<double>(correct) / static_cast<double>(test.size());
            seen_correct += correct;
            seen_total += test.size();
        }
        report.step_acc.push_back(seen_total ? static_cast<double>(seen_correct) / static_cast<double>(seen_total)
                                             : 0.0);
    }

    if (artifacts) {
        artifacts->adapters = strategy == Strategy::PerTaskNoMerge ? per_task : std::vector<AdapterModule>{*current};
    }
    report.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - wall_start).count();
    return report;
}

} // namespace onea

#endif // ONEA_SIM_HPP
