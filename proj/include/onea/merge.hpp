#ifndef ONEA_MERGE_HPP
#define ONEA_MERGE_HPP

//
// Asymmetric subspace fusion of adapter modules.
//
// Per parameter matrix: decompose the base (larger-data) matrix, project the
// align matrix into the base right-singular space, blend the right singular
// components with information-adaptive global weights, then gate the blend
// per singular direction from the normalised base spectrum and rebuild with
// the frozen U_b·Σ_b. Parameter averaging and concatenation-SVD (symmetric)
// merging are provided as baselines.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onea/adapter.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"
#include "onea/svd.hpp"

namespace onea {

enum class InfoProxy {
    ClassCount,
    FrobeniusNorm,
    SingularEnergy,
};

inline std::string to_string(InfoProxy p)
{
    switch (p) {
    case InfoProxy::ClassCount:
        return "class-count";
    case InfoProxy::FrobeniusNorm:
        return "frobenius";
    case InfoProxy::SingularEnergy:
        return "singular-energy";
    }
    return "?";
}

inline InfoProxy info_proxy_from_string(const std::string& s)
{
    if (s == "class-count")
        return InfoProxy::ClassCount;
    if (s == "frobenius")
        return InfoProxy::FrobeniusNorm;
    if (s == "singular-energy")
        return InfoProxy::SingularEnergy;
    throw spec_error("unknown info_proxy '" + s + "' (expected class-count, frobenius or singular-energy)");
}

struct MergeConfig {
    double quantile_q = 0.5;
    double sharpness_kappa = 10.0;
    double delta = 1e-6;
    double rank_eps = 1e-10;
    InfoProxy info_proxy = InfoProxy::ClassCount;

    void validate() const
    {
        if (!(quantile_q >= 0.0 && quantile_q <= 1.0))
            throw spec_error("quantile_q must lie in [0, 1]");
        if (!(sharpness_kappa > 0.0))
            throw spec_error("sharpness_kappa must be > 0");
        if (!(delta > 0.0))
            throw spec_error("delta must be > 0");
        if (!(rank_eps > 0.0))
            throw spec_error("rank_eps must be > 0");
    }
};

/// Per-direction fusion strengths, each in [0, 1].
struct GateVector {
    std::vector<double> g;
};

struct FusionWeights {
    double base = 0.5;
    double align = 0.5;
    /// Both proxies were zero and the weights fell back to 0.5 / 0.5.
    bool fallback = false;
};

struct Roles {
    const AdapterModule* base;
    const AdapterModule* align;
    bool new_is_base;
};

/// The module with more absorbed samples becomes the base. Ties go to the new module.
inline Roles select_roles(const AdapterModule& incoming, const AdapterModule& accumulated)
{
    if (incoming.meta.sample_count >= accumulated.meta.sample_count)
        return {&incoming, &accumulated, true};
    return {&accumulated, &incoming, false};
}

/// V_{a→b} = W_aᵀ·U_b·Σ_b⁻¹ over the effective rank; remaining columns are zero.
inline Matrix align_to_base(const SingularDecomposition& base, const Matrix& w_align)
{
    if (w_align.rows() != base.U.rows() || w_align.cols() != base.V.rows())
        throw dimension_error("align_to_base: align matrix " + w_align.shape() + " does not match base " +
                              std::to_string(base.U.rows()) + "x" + std::to_string(base.V.rows()));
    if (base.effective_rank == 0)
        throw numeric_error("align_to_base: base matrix has effective rank 0");
    Matrix v = matmul_tn(w_align, base.U);
    std::vector<double> inv(base.rank(), 0.0);
    for (std::size_t i = 0; i < base.effective_rank; ++i)
        inv[i] = 1.0 / base.sigma[i];
    return scale_columns(std::move(v), inv);
}

namespace detail {

inline double proxy_value(const TaskMeta& meta, const Matrix& w, InfoProxy proxy)
{
    switch (proxy) {
    case InfoProxy::ClassCount:
        return static_cast<double>(meta.class_count());
    case InfoProxy::FrobeniusNorm:
        return frobenius_norm(w);
    case InfoProxy::SingularEnergy:
        // Σ s_i² equals ‖W‖_F², so no decomposition is needed.
        return squared_frobenius_norm(w);
    }
    return 0.0;
}

} // namespace detail

/// w_a = φ_a / (φ_a + φ_b), w_b = 1 − w_a.
inline FusionWeights info_weights(const TaskMeta& base_meta, const TaskMeta& align_meta, const Matrix& base_w,
                                  const Matrix& align_w, const MergeConfig& cfg)
{
    const double phi_b = detail::proxy_value(base_meta, base_w, cfg.info_proxy);
    const double phi_a = detail::proxy_value(align_meta, align_w, cfg.info_proxy);
    if (!(phi_a + phi_b > 0.0))
        return {0.5, 0.5, true};
    const double wa = phi_a / (phi_a + phi_b);
    return {1.0 - wa, wa, false};
}

/// w_b·V_b + w_a·V_{a→b}
inline Matrix global_fuse(const Matrix& v_base, const Matrix& v_aligned, double w_base, double w_align)
{
    Matrix::require_same_shape(v_base, v_aligned, "global_fuse");
    Matrix out = v_base * w_base;
    out += v_aligned * w_align;
    return out;
}

/// q-quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw dimension_error("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// g_i = logistic(κ·(θ − s̃_i)) with s̃_i = σ_i / (σ_1 + δ) and θ the q-quantile
/// of s̃ over the effective rank (all directions when the spectrum is zero).
inline GateVector gate_vector(std::span<const double> sigma, const MergeConfig& cfg)
{
    if (sigma.empty())
        throw dimension_error("gate_vector: empty spectrum");
    const double denom = sigma[0] + cfg.delta;
    std::vector<double> normalized(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i)
        normalized[i] = sigma[i] / denom;

    std::size_t active = effective_rank(sigma, cfg.rank_eps);
    if (active == 0)
        active = sigma.size();
    const double theta = quantile({normalized.begin(), normalized.begin() + static_cast<std::ptrdiff_t>(active)},
                                  cfg.quantile_q);

    GateVector gate;
    gate.g.resize(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i)
        gate.g[i] = logistic(cfg.sharpness_kappa * (theta - normalized[i]));
    return gate;
}

/// U_b·Σ_b·V_finalᵀ with V_final = V_b + g⊙(w_b·V_b + w_a·V_{a→b} − V_b), over the effective rank.
inline Matrix merge_layer(const SingularDecomposition& base, const Matrix& w_align, const FusionWeights& weights,
                          const GateVector& gate)
{
    if (gate.g.size() != base.rank())
        throw dimension_error("merge_layer: gate length does not match decomposition rank");
    const Matrix aligned = align_to_base(base, w_align);
    const Matrix fused = global_fuse(base.V, aligned, weights.base, weights.align);
    Matrix v_final = base.V;
    v_final += scale_columns(fused - base.V, gate.g);

    SingularDecomposition out{base.U, base.sigma, std::move(v_final), base.effective_rank};
    return out.reconstruct(base.effective_rank);
}

inline Matrix merge_layer(const Matrix& w_base, const Matrix& w_align, const FusionWeights& weights,
                          const MergeConfig& cfg)
{
    Matrix::require_same_shape(w_base, w_align, "merge_layer");
    const auto base = thin_svd(w_base, cfg.rank_eps);
    return merge_layer(base, w_align, weights, gate_vector(base.sigma, cfg));
}

inline Matrix merge_layer(const Matrix& w_base, const Matrix& w_align, double w_b, double w_a,
                          const MergeConfig& cfg)
{
    return merge_layer(w_base, w_align, FusionWeights{w_b, w_a, false}, cfg);
}

/// Per-layer diagnostics of a module merge.
struct MergeTrace {
    bool new_is_base = false;
    std::vector<FusionWeights> weights;
    std::vector<std::size_t> effective_ranks;
};

/// Asymmetric fusion of a freshly trained module into the accumulated one.
/// One thin SVD per parameter matrix.
inline AdapterModule merge_modules(const AdapterModule& incoming, const AdapterModule& accumulated,
                                   const MergeConfig& cfg, MergeTrace* trace = nullptr)
{
    cfg.validate();
    require_mergeable(incoming, accumulated);
    const Roles roles = select_roles(incoming, accumulated);

    AdapterModule out;
    out.bottleneck = incoming.bottleneck;
    out.meta = merge_meta(accumulated.meta, incoming.meta);
    out.layers.reserve(incoming.layers.size());
    if (trace)
        *trace = MergeTrace{roles.new_is_base, {}, {}};

    for (std::size_t l = 0; l < incoming.layers.size(); ++l) {
        const Matrix& wb = roles.base->layers[l];
        const Matrix& wa = roles.align->layers[l];
        const FusionWeights w = info_weights(roles.base->meta, roles.align->meta, wb, wa, cfg);
        const auto base = thin_svd(wb, cfg.rank_eps);
        if (base.effective_rank == 0) {
            // Zero base matrix: nothing to project onto, keep it.
            out.layers.push_back(wb);
        } else {
            out.layers.push_back(merge_layer(base, wa, w, gate_vector(base.sigma, cfg)));
        }
        if (trace) {
            trace->weights.push_back(w);
            trace->effective_ranks.push_back(base.effective_rank);
        }
    }
    return out;
}

/// First task: nothing accumulated yet, the new module passes through unchanged.
inline AdapterModule merge_modules(const AdapterModule& incoming, const std::optional<AdapterModule>& accumulated,
                                   const MergeConfig& cfg, MergeTrace* trace = nullptr)
{
    if (!accumulated)
        return incoming;
    return merge_modules(incoming, *accumulated, cfg, trace);
}

/// Running mean over tasks: (n·acc + new) / (n + 1).
inline AdapterModule merge_average(const AdapterModule& incoming, const AdapterModule& accumulated,
                                   std::size_t n_prev_tasks)
{
    require_mergeable(incoming, accumulated);
    const double n = static_cast<double>(n_prev_tasks);
    AdapterModule out;
    out.bottleneck = incoming.bottleneck;
    out.meta = merge_meta(accumulated.meta, incoming.meta);
    for (std::size_t l = 0; l < incoming.layers.size(); ++l) {
        Matrix m = accumulated.layers[l] * n;
        m += incoming.layers[l];
        m *= 1.0 / (n + 1.0);
        out.layers.push_back(std::move(m));
    }
    return out;
}

/// Symmetric alignment of one layer: SVD of [W_b | W_a], weighted average of
/// the two right-singular blocks, rebuild with the shared U·Σ.
inline Matrix merge_symmetric_layer(const Matrix& w_base, const Matrix& w_align, double w_b, double w_a,
                                    const MergeConfig& cfg, std::size_t* rank = nullptr)
{
    Matrix::require_same_shape(w_base, w_align, "merge_symmetric");
    const std::size_t n = w_base.cols();
    const auto svd = thin_svd(hconcat(w_base, w_align), cfg.rank_eps);
    Matrix v_merged = row_block(svd.V, 0, n) * w_b;
    v_merged += row_block(svd.V, n, n) * w_a;
    if (rank)
        *rank = svd.effective_rank;
    SingularDecomposition out{svd.U, svd.sigma, std::move(v_merged), svd.effective_rank};
    return out.reconstruct();
}

/// Layer order of the concatenation is [base | align]; the caller supplies
/// the weights (normally from info_weights).
inline AdapterModule merge_symmetric(const AdapterModule& base, const AdapterModule& align, double w_b, double w_a,
                                     const MergeConfig& cfg)
{
    cfg.validate();
    require_mergeable(base, align);
    AdapterModule out;
    out.bottleneck = base.bottleneck;
    out.meta = merge_meta(base.meta, align.meta);
    for (std::size_t l = 0; l < base.layers.size(); ++l)
        out.layers.push_back(merge_symmetric_layer(base.layers[l], align.layers[l], w_b, w_a, cfg));
    return out;
}

/// Symmetric baseline with the same role selection and information weights as
/// the asymmetric merge, so the two differ only in how the subspace is formed.
inline AdapterModule merge_symmetric_modules(const AdapterModule& incoming, const AdapterModule& accumulated,
                                             const MergeConfig& cfg, MergeTrace* trace = nullptr)
{
    cfg.validate();
    require_mergeable(incoming, accumulated);
    const Roles roles = select_roles(incoming, accumulated);
    if (trace)
        *trace = MergeTrace{roles.new_is_base, {}, {}};
    AdapterModule out;
    out.bottleneck = incoming.bottleneck;
    out.meta = merge_meta(accumulated.meta, incoming.meta);
    for (std::size_t l = 0; l < incoming.layers.size(); ++l) {
        const Matrix& wb = roles.base->layers[l];
        const Matrix& wa = roles.align->layers[l];
        const FusionWeights w = info_weights(roles.base->meta, roles.align->meta, wb, wa, cfg);
        std::size_t rank = 0;
        out.layers.push_back(merge_symmetric_layer(wb, wa, w.base, w.align, cfg, &rank));
        if (trace) {
            trace->weights.push_back(w);
            trace->effective_ranks.push_back(rank);
        }
    }
    return out;
}

} // namespace onea

#endif // ONEA_MERGE_HPP
