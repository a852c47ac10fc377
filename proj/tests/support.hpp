#ifndef ONEA_TESTS_SUPPORT_HPP
#define ONEA_TESTS_SUPPORT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onea/onea.hpp"

namespace onea::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(r, c);
    for (auto& v : m.data())
        v = normal(rng);
    return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m)
{
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e)
{
    Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            m(i, j) = e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b)
{
    if (!a.same_shape(b))
        return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
    return d;
}

inline AdapterModule random_module(std::size_t d, std::size_t b, Rng& rng, std::uint64_t samples = 100,
                                   int first_class = 0, int classes = 2, double scale = 1.0)
{
    AdapterModule m;
    m.bottleneck = b;
    m.layers.push_back(random_matrix(d, b, rng, scale));
    m.layers.push_back(random_matrix(b, d, rng, scale));
    m.meta.task_id = 1;
    for (int c = 0; c < classes; ++c)
        m.meta.class_ids.insert(first_class + c);
    m.meta.sample_count = samples;
    return m;
}

/// Fresh directory under the build tree (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name)
{
    static std::atomic<int> counter{0};
    std::filesystem::path root;
    if (const char* env = std::getenv("ONEA_TEST_TMP"); env && *env)
        root = env;
    else
        root = std::filesystem::temp_directory_path() / "onea-tests";
    const auto dir = root / (name + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Independent oracles (Eigen only, no library merge code)

/// Asymmetric fusion of one matrix, written out step by step.
inline Eigen::MatrixXd oracle_asymmetric(const Eigen::MatrixXd& wb, const Eigen::MatrixXd& wa, double w_b,
                                         double w_a, double q, double kappa, double delta, double rank_eps)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(wb, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd U = svd.matrixU();
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::MatrixXd V = svd.matrixV();
    const Eigen::Index r = s.size();

    Eigen::Index keep = 0;
    while (keep < r && s(keep) > rank_eps * s(0))
        ++keep;

    // Projection of the align matrix onto the base right-singular space.
    Eigen::MatrixXd v_ab = Eigen::MatrixXd::Zero(V.rows(), r);
    for (Eigen::Index i = 0; i < keep; ++i)
        v_ab.col(i) = wa.transpose() * U.col(i) / s(i);

    const Eigen::MatrixXd v_fused = w_b * V + w_a * v_ab;

    std::vector<double> st(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i)
        st[static_cast<std::size_t>(i)] = s(i) / (s(0) + delta);
    std::vector<double> sorted(st.begin(), st.begin() + keep);
    std::sort(sorted.begin(), sorted.end());
    const double h = q * static_cast<double>(sorted.size() - 1);
    const double lo = std::floor(h);
    const double hi = std::min(lo + 1.0, static_cast<double>(sorted.size() - 1));
    const double theta = sorted[static_cast<std::size_t>(lo)] +
                         (h - lo) * (sorted[static_cast<std::size_t>(hi)] - sorted[static_cast<std::size_t>(lo)]);

    Eigen::MatrixXd v_final = V;
    for (Eigen::Index i = 0; i < r; ++i) {
        const double g = 1.0 / (1.0 + std::exp(-kappa * (theta - st[static_cast<std::size_t>(i)])));
        v_final.col(i) = V.col(i) + g * (v_fused.col(i) - V.col(i));
    }

    return U.leftCols(keep) * s.head(keep).asDiagonal() * v_final.leftCols(keep).transpose();
}

/// Symmetric baseline for one matrix: SVD of [W_b | W_a], mix the V blocks, rebuild.
inline Eigen::MatrixXd oracle_symmetric(const Eigen::MatrixXd& wb, const Eigen::MatrixXd& wa, double w_b,
                                        double w_a)
{
    Eigen::MatrixXd x(wb.rows(), wb.cols() + wa.cols());
    x << wb, wa;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd V = svd.matrixV();
    const Eigen::MatrixXd vm = w_b * V.topRows(wb.cols()) + w_a * V.bottomRows(wa.cols());
    return svd.matrixU() * svd.singularValues().asDiagonal() * vm.transpose();
}

/// Singular values from the eigenvalues of WᵀW (or WWᵀ), descending.
inline std::vector<double> oracle_singular_values(const Eigen::MatrixXd& w)
{
    const Eigen::MatrixXd g = w.rows() >= w.cols() ? Eigen::MatrixXd(w.transpose() * w)
                                                   : Eigen::MatrixXd(w * w.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    std::vector<double> s;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
        s.push_back(std::sqrt(std::max(0.0, eig.eigenvalues()(i))));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

} // namespace onea::test

#endif // ONEA_TESTS_SUPPORT_HPP
