#ifndef ONEA_SVD_HPP
#define ONEA_SVD_HPP

//
// Thin SVD by one-sided (Hestenes) Jacobi rotations.
//
// Columns of a working copy of W are rotated pairwise until mutually
// orthogonal; the accumulated rotations form V, the column norms are the
// singular values and the normalised columns are U. The method is
// deterministic and delivers singular values to high relative accuracy,
// which the merge code relies on when it inverts Σ.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "onea/counters.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"

namespace onea {

/// W = U·diag(sigma)·Vᵀ with U: rows×r, V: cols×r, r = min(rows, cols).
struct SingularDecomposition {
    Matrix U;
    std::vector<double> sigma;
    Matrix V;
    /// Number of sigma_i > rank_eps·sigma_0.
    std::size_t effective_rank = 0;

    std::size_t rank() const noexcept { return sigma.size(); }

    /// U·diag(sigma)·Vᵀ restricted to the first `k` directions.
    Matrix reconstruct(std::size_t k) const
    {
        k = std::min(k, sigma.size());
        Matrix us(U.rows(), k);
        for (std::size_t i = 0; i < U.rows(); ++i)
            for (std::size_t j = 0; j < k; ++j)
                us(i, j) = U(i, j) * sigma[j];
        Matrix vk(V.rows(), k);
        for (std::size_t i = 0; i < V.rows(); ++i)
            for (std::size_t j = 0; j < k; ++j)
                vk(i, j) = V(i, j);
        return matmul_nt(us, vk);
    }

    Matrix reconstruct() const { return reconstruct(sigma.size()); }
};

inline std::size_t effective_rank(std::span<const double> sigma, double rank_eps)
{
    if (sigma.empty() || sigma[0] <= 0.0)
        return 0;
    const double cutoff = rank_eps * sigma[0];
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [cutoff](double s) { return s > cutoff; }));
}

namespace detail {

inline constexpr int jacobi_max_sweeps = 80;

/// One-sided Jacobi on a tall (rows ≥ cols) matrix. Returns U (rows×n), sigma, V (n×n), unsorted.
inline void jacobi_tall(Matrix a, Matrix& u, std::vector<double>& sigma, Matrix& v)
{
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const double eps = std::numeric_limits<double>::epsilon();

    // Columns are read with stride; work on the transpose so each is contiguous.
    Matrix at = transpose(a);
    Matrix vt = Matrix::identity(n);

    // Columns below this norm are numerically zero; rotating them only chases rounding noise.
    const double negligible = static_cast<double>(std::max(m, n)) * eps * frobenius_norm(a);
    const double negligible_sq = negligible * negligible;

    bool converged = n < 2;
    for (int sweep = 0; sweep < jacobi_max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                auto cp = at.row(p);
                auto cq = at.row(q);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += cp[i] * cp[i];
                    beta += cq[i] * cq[i];
                    gamma += cp[i] * cq[i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha) * std::sqrt(beta))
                    continue;
                if (alpha <= negligible_sq || beta <= negligible_sq)
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = cp[i], y = cq[i];
                    cp[i] = c * x - s * y;
                    cq[i] = s * x + c * y;
                }
                auto vp = vt.row(p);
                auto vq = vt.row(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
    }
    if (!converged)
        throw numeric_error("thin_svd: Jacobi sweeps did not converge");

    sigma.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        sigma[j] = norm2(at.row(j));

    // Sort by descending singular value; stable so exact ties keep column order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    std::vector<double> sorted(n);
    u = Matrix(m, n);
    v = Matrix(n, n);
    const double smax = sigma[order[0]];
    const double tiny = static_cast<double>(std::max(m, n)) * eps * smax;
    std::vector<std::size_t> deficient;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        sorted[k] = sigma[j];
        for (std::size_t i = 0; i < n; ++i)
            v(i, k) = vt(j, i);
        if (sigma[j] > tiny && sigma[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i)
                u(i, k) = at(j, i) / sigma[j];
        } else {
            deficient.push_back(k);
        }
    }
    sigma = std::move(sorted);

    // Complete U with orthonormal directions where the column collapsed.
    // Columns not yet filled are zero and drop out of the projection.
    for (std::size_t k : deficient) {
        bool placed = false;
        for (std::size_t e = 0; e < m && !placed; ++e) {
            std::vector<double> cand(m, 0.0);
            cand[e] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == k)
                        continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        proj += u(i, j) * cand[i];
                    for (std::size_t i = 0; i < m; ++i)
                        cand[i] -= proj * u(i, j);
                }
            }
            const double nrm = norm2(cand);
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < m; ++i)
                    u(i, k) = cand[i] / nrm;
                placed = true;
            }
        }
        if (!placed)
            throw numeric_error("thin_svd: could not complete orthonormal basis");
    }
}

/// Flip (u_k, v_k) so the largest-magnitude entry of u_k is positive.
inline void fix_signs(Matrix& u, Matrix& v)
{
    for (std::size_t k = 0; k < u.cols(); ++k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < u.rows(); ++i)
            if (std::abs(u(i, k)) > std::abs(u(best, k)))
                best = i;
        if (u(best, k) < 0.0) {
            for (std::size_t i = 0; i < u.rows(); ++i)
                u(i, k) = -u(i, k);
            for (std::size_t i = 0; i < v.rows(); ++i)
                v(i, k) = -v(i, k);
        }
    }
}

} // namespace detail

/// Thin SVD. Deterministic; sigma non-increasing; U and V have orthonormal columns.
inline SingularDecomposition thin_svd(const Matrix& w, double rank_eps = 1e-10)
{
    if (w.empty())
        throw dimension_error("thin_svd: empty matrix");
    if (!w.all_finite())
        throw numeric_error("thin_svd: non-finite input");
    ++counters().svd_calls;

    // Power-of-two rescaling keeps column inner products in range and is exact.
    double max_abs = 0.0;
    for (double x : w.data())
        max_abs = std::max(max_abs, std::abs(x));
    int exponent = 0;
    if (max_abs > 0.0)
        std::frexp(max_abs, &exponent);
    Matrix scaled = w;
    if (exponent != 0)
        for (double& x : scaled.data())
            x = std::ldexp(x, -exponent);

    SingularDecomposition out;
    if (scaled.rows() >= scaled.cols()) {
        detail::jacobi_tall(scaled, out.U, out.sigma, out.V);
    } else {
        // W = (Wᵀ)ᵀ = (U' Σ V'ᵀ)ᵀ = V' Σ U'ᵀ
        detail::jacobi_tall(transpose(scaled), out.V, out.sigma, out.U);
    }
    for (double& s : out.sigma)
        s = std::ldexp(s, exponent);
    detail::fix_signs(out.U, out.V);
    out.effective_rank = effective_rank(out.sigma, rank_eps);
    return out;
}

} // namespace onea

#endif // ONEA_SVD_HPP
