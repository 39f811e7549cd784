#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cmar/error.hpp"
#include "cmar/stats.hpp"

// Per-block detector: standardization from training statistics, full PCA
// (every component above a numerical rank floor is retained, so there is
// no residual subspace), Hotelling T^2 with an F-distribution control
// limit, and clipped per-variable contribution ratios.

namespace cmar {

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // sample std, n-1 denominator; all > 0
};

// Column means and sample standard deviations. names[] labels columns in
// error messages.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& X,
                                     const std::vector<std::string>& names) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (n < 2) throw computation_error("standardizer needs at least 2 samples");
    if (!X.allFinite()) throw computation_error("training data contains non-finite values");
    Standardizer s;
    s.mean.resize(p);
    s.stddev.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double m = X.col(j).mean();
        const double var = (X.col(j).array() - m).square().sum() / static_cast<double>(n - 1);
        const double sd = std::sqrt(var);
        if (sd < 1e-12) {
            const std::string label =
                j < static_cast<Eigen::Index>(names.size()) ? names[j] : std::to_string(j);
            throw computation_error("variable '" + label + "' has zero variance in training data");
        }
        s.mean[j] = m;
        s.stddev[j] = sd;
    }
    return s;
}

inline Eigen::VectorXd standardize(const Standardizer& s, const Eigen::VectorXd& x) {
    Eigen::VectorXd z(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) z[j] = (x[j] - s.mean[j]) / s.stddev[j];
    return z;
}

inline Eigen::MatrixXd standardize(const Standardizer& s, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        Z.col(j) = (X.col(j).array() - s.mean[j]) / s.stddev[j];
    return Z;
}

// Control limit for T^2 with p_eff retained components fitted on n samples:
//   (n^2 - 1) p_eff / (n (n - p_eff)) * F_quantile(1 - alpha; p_eff, n - p_eff)
inline double t2_control_limit(int n, int p_eff, double alpha) {
    if (p_eff < 1 || n <= p_eff)
        throw input_error("T^2 limit requires n > p_eff >= 1 (n=" + std::to_string(n) +
                          ", p_eff=" + std::to_string(p_eff) + ")");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw input_error("significance level must lie strictly in (0, 1)");
    const double nn = static_cast<double>(n);
    const double coeff = (nn * nn - 1.0) * p_eff / (nn * (nn - p_eff));
    return coeff * f_quantile(1.0 - alpha, p_eff, n - p_eff);
}

struct PcaModel {
    std::string block_name;
    std::vector<std::string> variables;
    Standardizer standardizer;
    Eigen::MatrixXd loadings;     // p x k, orthonormal columns
    Eigen::VectorXd eigenvalues;  // k score variances, descending
    double alpha = 0.01;
    double t2_limit = 0.0;
    int n_train = 0;

    int p() const { return static_cast<int>(loadings.rows()); }
    int k() const { return static_cast<int>(loadings.cols()); }
};

// Eigendecomposition of the sample covariance of standardized X. All
// components with eigenvalue above 1e-10 * lambda_max are retained; the
// floor keeps exact linear dependencies from blowing up T^2.
inline PcaModel fit_full_pca(const Eigen::MatrixXd& X_std, double alpha,
                             std::vector<std::string>* warnings = nullptr) {
    const auto n = X_std.rows();
    const auto p = X_std.cols();
    if (n < 2 || p < 1) throw computation_error("PCA fit needs n >= 2 samples and p >= 1 columns");
    if (!X_std.allFinite()) throw computation_error("PCA fit input contains non-finite values");
    if (n <= p && warnings)
        warnings->push_back("n_train=" + std::to_string(n) + " <= p=" + std::to_string(p) +
                            "; covariance is rank deficient");

    const Eigen::MatrixXd cov =
        X_std.transpose() * X_std / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw computation_error("eigendecomposition did not converge");

    // Eigen reports ascending order; walk from the back for descending.
    const Eigen::VectorXd& ev = solver.eigenvalues();
    const double floor = 1e-10 * std::max(ev[p - 1], 0.0);
    if (!(ev[p - 1] > 0.0))
        throw computation_error("covariance has no positive eigenvalue");
    int k = 0;
    for (Eigen::Index i = p - 1; i >= 0 && ev[i] > floor; --i) ++k;

    PcaModel m;
    m.alpha = alpha;
    m.n_train = static_cast<int>(n);
    m.eigenvalues.resize(k);
    m.loadings.resize(p, k);
    for (int c = 0; c < k; ++c) {
        const Eigen::Index src = p - 1 - c;
        m.eigenvalues[c] = ev[src];
        Eigen::VectorXd col = solver.eigenvectors().col(src);
        // Deterministic sign: largest-magnitude coefficient is positive.
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col[arg] < 0.0) col = -col;
        m.loadings.col(c) = col;
    }
    m.t2_limit = t2_control_limit(m.n_train, k, alpha);
    return m;
}

// T^2 = sum_i t_i^2 / lambda_i with scores t = P^T x.
inline double hotelling_t2(const PcaModel& m, const Eigen::VectorXd& x_std) {
    if (x_std.size() != m.loadings.rows())
        throw input_error("observation has " + std::to_string(x_std.size()) +
                          " entries, model expects " + std::to_string(m.loadings.rows()));
    if (!x_std.allFinite()) throw computation_error("observation contains non-finite values");
    const Eigen::VectorXd t = m.loadings.transpose() * x_std;
    return (t.array().square() / m.eigenvalues.array()).sum();
}

// Clipped contribution ratio per variable:
//   cont(t_i, x_j) = max(0, t_i P_ij x_j / (lambda_i T2_lim))
//   CONT(x_j) = min(1, sum_i cont(t_i, x_j))
// Before clipping the terms sum to T^2 / T2_lim over all i, j.
inline Eigen::VectorXd contributions(const PcaModel& m, const Eigen::VectorXd& x_std) {
    if (x_std.size() != m.loadings.rows())
        throw input_error("observation has " + std::to_string(x_std.size()) +
                          " entries, model expects " + std::to_string(m.loadings.rows()));
    if (!x_std.allFinite()) throw computation_error("observation contains non-finite values");
    const Eigen::VectorXd t = m.loadings.transpose() * x_std;
    Eigen::VectorXd cont = Eigen::VectorXd::Zero(x_std.size());
    for (Eigen::Index j = 0; j < x_std.size(); ++j) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double term = t[i] * m.loadings(j, i) * x_std[j] / (m.eigenvalues[i] * m.t2_limit);
            if (term > 0.0) sum += term;
        }
        cont[j] = std::min(1.0, sum);
    }
    return cont;
}

inline nlohmann::json model_to_json(const PcaModel& m) {
    std::vector<double> loadings;
    loadings.reserve(static_cast<std::size_t>(m.p()) * m.k());
    for (int r = 0; r < m.p(); ++r)
        for (int c = 0; c < m.k(); ++c) loadings.push_back(m.loadings(r, c));
    return {{"block_name", m.block_name},
            {"variables", m.variables},
            {"mean", m.standardizer.mean},
            {"std", m.standardizer.stddev},
            {"loadings", loadings},
            {"eigenvalues", std::vector<double>(m.eigenvalues.begin(), m.eigenvalues.end())},
            {"alpha", m.alpha},
            {"t2_limit", m.t2_limit},
            {"n_train", m.n_train}};
}

inline PcaModel model_from_json(const nlohmann::json& j) {
    PcaModel m;
    m.block_name = j.at("block_name").get<std::string>();
    m.variables = j.at("variables").get<std::vector<std::string>>();
    m.standardizer.mean = j.at("mean").get<std::vector<double>>();
    m.standardizer.stddev = j.at("std").get<std::vector<double>>();
    const auto eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    const auto loadings = j.at("loadings").get<std::vector<double>>();
    m.alpha = j.at("alpha").get<double>();
    m.t2_limit = j.at("t2_limit").get<double>();
    m.n_train = j.at("n_train").get<int>();

    const std::size_t p = m.variables.size();
    const std::size_t k = eigenvalues.size();
    if (m.standardizer.mean.size() != p || m.standardizer.stddev.size() != p ||
        loadings.size() != p * k)
        throw input_error("model '" + m.block_name + "' has inconsistent field sizes");
    m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), k);
    m.loadings.resize(p, k);
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < k; ++c) m.loadings(r, c) = loadings[r * k + c];
    return m;
}

inline nlohmann::json models_to_json(const std::vector<PcaModel>& models) {
    nlohmann::json doc = nlohmann::json::array();
    for (const PcaModel& m : models) doc.push_back(model_to_json(m));
    return doc;
}

inline std::vector<PcaModel> models_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw input_error("model bundle must be a JSON array");
    std::vector<PcaModel> models;
    for (const nlohmann::json& j : doc) models.push_back(model_from_json(j));
    return models;
}

}  // namespace cmar
