#pragma once

#include <Eigen/Dense>

namespace homog {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Eigenvalues of the symmetric part, ascending.
Vec sym_eigenvalues(const Mat& a);

double max_eigenvalue(const Mat& a);
double min_eigenvalue(const Mat& a);

/// Operator norm |A| = sup_{|x|=1} |Ax| (largest singular value).
double operator_norm(const Mat& a);

/// Max |a_ij - a_ji|.
double asymmetry(const Mat& a);

Mat symmetrize(const Mat& a);

/// True if p.(b - a)p >= -tol |p|^2 for all p.
bool psd_leq(const Mat& a, const Mat& b, double tol);

}  // namespace homog
