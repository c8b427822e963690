#include "homog/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "homog/error.hpp"

namespace homog {

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

Vec sym_eigenvalues(const Mat& a)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double max_eigenvalue(const Mat& a) { return sym_eigenvalues(a).maxCoeff(); }

double min_eigenvalue(const Mat& a) { return sym_eigenvalues(a).minCoeff(); }

double operator_norm(const Mat& a)
{
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double asymmetry(const Mat& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

bool psd_leq(const Mat& a, const Mat& b, double tol) { return min_eigenvalue(b - a) >= -tol; }

std::string_view category_name(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::coverage: return "coverage";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::statistics: return "statistics";
    case ErrorCategory::io: return "io";
    case ErrorCategory::internal: return "internal";
    }
    return "internal";
}

int exit_code(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::coverage: return 3;
    case ErrorCategory::solver: return 4;
    case ErrorCategory::statistics: return 5;
    case ErrorCategory::io: return 6;
    case ErrorCategory::internal: return 7;
    }
    return 7;
}

}  // namespace homog
