#include "stealthsim/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "stealthsim/errors.hpp"
#include "stealthsim/textio.hpp"

namespace stealthsim {

namespace {

constexpr double kRankRelTol = 1e-8;

int svd_rank(const Matrix& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cutoff = kRankRelTol * sv(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

using CMatrix = Eigen::MatrixXcd;

int svd_rank_complex(const CMatrix& M, double* sigma_max = nullptr) {
  Eigen::JacobiSVD<CMatrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sigma_max) *sigma_max = sv.size() ? sv(0) : 0.0;
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cutoff = kRankRelTol * sv(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

// System pencil value  [ zI - A  -B ; C  0 ].
CMatrix pencil_at(const Matrix& A, const Matrix& B, const Matrix& C,
                  std::complex<double> z) {
  const auto nx = A.rows();
  const auto nu = B.cols();
  const auto ny = C.rows();
  CMatrix P = CMatrix::Zero(nx + ny, nx + nu);
  P.topLeftCorner(nx, nx) = -A.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < nx; ++i) P(i, i) += z;
  P.topRightCorner(nx, nu) = -B.cast<std::complex<double>>();
  P.bottomLeftCorner(ny, nx) = C.cast<std::complex<double>>();
  return P;
}

void append_candidates(const Matrix& Mq, const Matrix& Eq,
                       std::vector<std::complex<double>>* out) {
  Eigen::GeneralizedEigenSolver<Matrix> ges;
  ges.compute(Mq, Eq, /*computeEigenvectors=*/false);
  if (ges.info() != Eigen::Success) return;
  const auto& alphas = ges.alphas();
  const auto& betas = ges.betas();
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    const double beta = betas(i);
    const std::complex<double> alpha = alphas(i);
    if (std::abs(beta) <= 1e-12 * std::max(1.0, std::abs(alpha))) continue;
    const std::complex<double> z = alpha / beta;
    if (std::isfinite(z.real()) && std::isfinite(z.imag())) out->push_back(z);
  }
}

}  // namespace

void validate_model(const StateSpaceModel& m) {
  const int nx = m.nx(), nu = m.nu(), ny = m.ny();
  if (nx == 0) throw DimensionMismatch("model: empty state");
  if (m.A.rows() != nx || m.A.cols() != nx) {
    throw DimensionMismatch("model: A must be square");
  }
  if (m.B.rows() != nx) throw DimensionMismatch("model: B has wrong row count");
  if (m.C.cols() != nx) throw DimensionMismatch("model: C has wrong column count");
  if (nu == 0 || ny == 0) throw DimensionMismatch("model: empty input or output");
  if (m.Sigma_w.rows() != nx || m.Sigma_w.cols() != nx) {
    throw DimensionMismatch("model: Sigma_w must be nx by nx");
  }
  if (m.Sigma_v.rows() != ny || m.Sigma_v.cols() != ny) {
    throw DimensionMismatch("model: Sigma_v must be ny by ny");
  }
  if (!is_symmetric(m.Sigma_w)) throw NotSymmetric("model: Sigma_w is not symmetric");
  if (!is_symmetric(m.Sigma_v)) throw NotSymmetric("model: Sigma_v is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> ew(symmetrize(m.Sigma_w));
  const double w_scale = std::max(1.0, ew.eigenvalues().cwiseAbs().maxCoeff());
  if (ew.eigenvalues().minCoeff() < -1e-9 * w_scale) {
    throw NoisePDViolation("model: Sigma_w must be positive semidefinite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> ev(symmetrize(m.Sigma_v));
  const double v_scale = std::max(1.0, ev.eigenvalues().cwiseAbs().maxCoeff());
  if (ev.eigenvalues().minCoeff() <= 1e-12 * v_scale) {
    throw NoisePDViolation("model: Sigma_v must be positive definite");
  }
}

std::vector<Matrix> markov_params(const Matrix& F, const Matrix& B,
                                  const Matrix& C, int count) {
  if (F.rows() != F.cols()) throw DimensionMismatch("markov_params: F must be square");
  if (B.rows() != F.rows() || C.cols() != F.cols()) {
    throw DimensionMismatch("markov_params: inconsistent shapes");
  }
  std::vector<Matrix> out;
  out.reserve(count);
  Matrix CFj = C;  // C F^{j-1}
  for (int j = 0; j < count; ++j) {
    out.push_back(CFj * B);
    CFj = CFj * F;
  }
  return out;
}

RightInvertibility check_right_invertible(const Matrix& F, const Matrix& B,
                                          const Matrix& C) {
  const int nx = static_cast<int>(F.rows());
  const int nu = static_cast<int>(B.cols());
  const int ny = static_cast<int>(C.rows());
  const int kmax = nx + 1;
  const auto marks = markov_params(F, B, C, kmax);

  RightInvertibility out;
  int prev_rank = 0;
  for (int k = 1; k <= kmax; ++k) {
    Matrix T = Matrix::Zero(k * ny, k * nu);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j) {
        T.block(i * ny, j * nu, ny, nu) = marks[i - j];
      }
    }
    const int r = svd_rank(T);
    out.rank_increments.push_back(r - prev_rank);
    if (!out.right_invertible && r - prev_rank == ny) {
      out.right_invertible = true;
      out.relative_delay = k;
    }
    prev_rank = r;
  }
  return out;
}

std::vector<std::complex<double>> invariant_zeros(const Matrix& A,
                                                  const Matrix& B,
                                                  const Matrix& C) {
  const auto nx = A.rows();
  const auto nu = B.cols();
  const auto ny = C.rows();
  if (A.cols() != nx || B.rows() != nx || C.cols() != nx) {
    throw DimensionMismatch("invariant_zeros: inconsistent shapes");
  }

  std::mt19937 rng(0x5eed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto rand_matrix = [&](Eigen::Index r, Eigen::Index c) {
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) M(i, j) = unif(rng);
    }
    return M;
  };

  // Normal rank of the pencil from deterministic pseudo-random sample points.
  int normal_rank = 0;
  for (int s = 0; s < 24; ++s) {
    const double radius = 0.3 + 1.7 * std::abs(unif(rng));
    const double angle = 3.14159265358979323846 * unif(rng);
    const std::complex<double> z(radius * std::cos(angle), radius * std::sin(angle));
    normal_rank = std::max(normal_rank, svd_rank_complex(pencil_at(A, B, C, z)));
  }
  if (normal_rank == 0) return {};

  const auto rows = nx + ny;
  const auto cols = nx + nu;
  Matrix M = Matrix::Zero(rows, cols);
  M.topLeftCorner(nx, nx) = A;
  M.topRightCorner(nx, nu) = B;
  M.bottomLeftCorner(ny, nx) = -C;
  Matrix E = Matrix::Zero(rows, cols);
  E.topLeftCorner(nx, nx) = Matrix::Identity(nx, nx);

  std::vector<std::complex<double>> candidates;
  if (rows == cols) {
    append_candidates(M, E, &candidates);
  } else {
    // Square up by random compression, twice with independent draws; true
    // zeros survive both (verification below discards the spurious ones).
    for (int round = 0; round < 2; ++round) {
      if (rows > cols) {
        const Matrix Th = rand_matrix(rows, cols);
        append_candidates(Th.transpose() * M, Th.transpose() * E, &candidates);
      } else {
        const Matrix Th = rand_matrix(cols, rows);
        append_candidates(M * Th, E * Th, &candidates);
      }
    }
  }

  std::vector<std::complex<double>> zeros;
  for (auto z : candidates) {
    if (std::abs(z.imag()) < 1e-9 * std::max(1.0, std::abs(z.real()))) {
      z = std::complex<double>(z.real(), 0.0);
    }
    const bool dup = std::any_of(zeros.begin(), zeros.end(), [&](const auto& w) {
      return std::abs(w - z) <= 1e-6 * std::max(1.0, std::abs(z));
    });
    if (dup) continue;
    if (svd_rank_complex(pencil_at(A, B, C, z)) < normal_rank) zeros.push_back(z);
  }

  std::sort(zeros.begin(), zeros.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return zeros;
}

StructureReport analyze_structure(const StateSpaceModel& m) {
  validate_model(m);
  StructureReport rep;
  rep.inversion = check_right_invertible(m.A, m.B, m.C);
  rep.zeros = invariant_zeros(m.A, m.B, m.C);
  rep.open_loop_spectral_radius = spectral_radius(m.A);
  rep.has_zero_on_or_outside_unit_circle =
      std::any_of(rep.zeros.begin(), rep.zeros.end(), [](const auto& z) {
        return std::abs(z) >= 1.0 - 1e-9;
      });
  return rep;
}

StateSpaceModel load_model(const std::string& config_path) {
  const auto stanzas = parse_stanzas(config_path);
  const Stanza& st = find_stanza(stanzas, "model");
  auto fetch = [&](const std::string& key) -> Matrix {
    if (st.matrices.count(key)) return st.matrices.at(key);
    if (st.has_scalar(key)) {
      return read_matrix_file(sibling_path(config_path, st.scalar(key)));
    }
    throw ParseError("model config is missing '" + key + "'");
  };
  StateSpaceModel m{fetch("A"), fetch("B"), fetch("C"), fetch("sigma_w"),
                    fetch("sigma_v")};
  validate_model(m);
  return m;
}

}  // namespace stealthsim
