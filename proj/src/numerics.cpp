#include "rfmpc/numerics.hpp"

#include <cmath>
#include <sstream>

namespace rfmpc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::IntegrationDiverged: return "integration-diverged";
        case ErrorKind::RankDeficient: return "rank-deficiency";
        case ErrorKind::InvalidFunnel: return "invalid-funnel";
        case ErrorKind::InvalidActivation: return "invalid-activation";
        case ErrorKind::InvalidPlant: return "invalid-plant";
        case ErrorKind::InvalidModel: return "invalid-model";
        case ErrorKind::MissingTransform: return "missing-transform";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::InfeasibleStart: return "infeasible-start";
        case ErrorKind::OcpInfeasible: return "ocp-infeasible";
        case ErrorKind::FunnelViolation: return "funnel-violation";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h) {
    const Vector k1 = rhs(t, x);
    const Vector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = rhs(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

int step_count(double span, double step) {
    if (span <= 0.0) return 0;
    const double ratio = span / step;
    return std::max(1, static_cast<int>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio))));
}

Trajectory integrate_rk4(const OdeProblem& prob, double t_end, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("integrate_rk4: step must be positive");
    if (t_end < prob.t0) throw std::invalid_argument("integrate_rk4: t_end precedes t0");
    if (prob.x0.size() != prob.dimension) throw std::invalid_argument("integrate_rk4: x0 has wrong dimension");

    Trajectory out;
    out.times.push_back(prob.t0);
    out.states.push_back(prob.x0);

    const double tol = 1e-12 * std::max(1.0, std::abs(t_end));
    double t = prob.t0;
    Vector x = prob.x0;
    for (long i = 1; t < t_end - tol; ++i) {
        double t_next = prob.t0 + static_cast<double>(i) * step;
        if (t_next > t_end - tol) t_next = t_end;
        Vector next = rk4_step(prob.rhs, t, x, t_next - t);
        if (!next.allFinite()) {
            std::ostringstream msg;
            msg << "integration diverged after t = " << t;
            throw IntegrationDiverged(t, msg.str());
        }
        t = t_next;
        x = std::move(next);
        out.times.push_back(t);
        out.states.push_back(x);
    }
    return out;
}

Matrix null_space_basis(const Matrix& H) {
    const Eigen::Index m = H.rows();
    const Eigen::Index n = H.cols();
    if (m > n) throw Error(ErrorKind::RankDeficient, "null_space_basis: more rows than columns");
    if (m == 0) return Matrix::Identity(n, n);

    Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(m - 1) > 1e-12 * sv(0))) {
        throw Error(ErrorKind::RankDeficient, "null_space_basis: H is not of full row rank");
    }
    if (m == n) return Matrix(n, 0);

    // The SVD null vectors are only defined up to rotation. The projector
    // onto ker H is unique, so the basis is extracted from its columns by
    // pivoted Gram-Schmidt (ties resolved towards the lower index). This makes
    // coordinate kernels come out as coordinate vectors.
    const Matrix W = svd.matrixV().rightCols(n - m);
    Matrix residual = W * W.transpose();
    Matrix V(n, n - m);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < n - m; ++k) {
        Eigen::Index pivot = -1;
        double best = -1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double norm = residual.col(j).norm();
            if (norm > best * (1.0 + 1e-12)) {
                best = norm;
                pivot = j;
            }
        }
        used[static_cast<std::size_t>(pivot)] = true;
        Vector v = residual.col(pivot) / best;
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < k; ++j) v -= V.col(j).dot(v) * V.col(j);
            v.normalize();
        }
        V.col(k) = v;
        residual -= v * (v.transpose() * residual);
    }
    return V;
}

Matrix pseudoinverse(const Matrix& V) {
    if (V.cols() == 0) return Matrix(0, V.rows());
    if (V.cols() > V.rows()) throw Error(ErrorKind::RankDeficient, "pseudoinverse: more columns than rows");
    Eigen::JacobiSVD<Matrix> svd(V);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) {
        throw Error(ErrorKind::RankDeficient, "pseudoinverse: V is not of full column rank");
    }
    const Matrix gram = V.transpose() * V;
    return gram.ldlt().solve(V.transpose());
}

}  // namespace rfmpc
