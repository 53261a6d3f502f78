#include "hns/control_skip.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

#include "hns/error.h"

namespace hns {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void PlantModel::Validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw DimensionError("A must be square");
  const auto m = B.cols();
  const auto p = C.rows();
  if (B.rows() != n) throw DimensionError("B must have n rows");
  if (C.cols() != n) throw DimensionError("C must have n columns");
  if (K.rows() != m || K.cols() != n) throw DimensionError("K must be m x n");
  if (L.rows() != n || L.cols() != p) throw DimensionError("L must be n x p");
}

MatrixXd PlantModel::A1() const {
  Validate();
  const int k = n();
  MatrixXd a1(2 * k, 2 * k);
  a1 << A, B * K, L * C, A - L * C + B * K;
  return a1;
}

MatrixXd PlantModel::A0() const {
  Validate();
  const int k = n();
  MatrixXd a0(2 * k, 2 * k);
  a0 << A, B * K, MatrixXd::Zero(k, k), MatrixXd::Identity(k, k);
  return a0;
}

Css Css::Parse(std::string_view text) {
  std::vector<bool> bits;
  for (char c : text) {
    if (c == '1') {
      bits.push_back(true);
    } else if (c == '0') {
      bits.push_back(false);
    } else {
      throw std::invalid_argument("CSS may only contain 0 and 1");
    }
  }
  return Css(std::move(bits));
}

std::string Css::ToString() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

int Css::LongestZeroRun() const {
  int best = 0;
  int run = 0;
  for (bool b : bits_) {
    run = b ? 0 : run + 1;
    best = std::max(best, run);
  }
  return best;
}

std::vector<int> Css::Subsequences() const {
  if (bits_.empty() || !bits_.front()) {
    throw std::invalid_argument("CSS must start with an execution");
  }
  std::vector<int> out;
  for (bool b : bits_) {
    if (b) {
      out.push_back(1);
    } else {
      ++out.back();
    }
  }
  return out;
}

bool Css::Respects(int skip_limit) const {
  return !bits_.empty() && bits_.front() && LongestZeroRun() <= skip_limit;
}

std::vector<SubseqDynamics> BuildSubsequences(const PlantModel& plant,
                                              int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  const MatrixXd a1 = plant.A1();
  const MatrixXd a0 = plant.A0();
  std::vector<SubseqDynamics> out;
  MatrixXd m = a1;
  for (int i = 1; i <= max_len; ++i) {
    out.push_back({i, m});
    m = a0 * m;
  }
  return out;
}

AugmentedState Step(const PlantModel& plant, const AugmentedState& x,
                    bool executed) {
  if (x.size() != 2 * plant.n()) {
    throw DimensionError("augmented state must have length 2n");
  }
  return executed ? AugmentedState(plant.A1() * x)
                  : AugmentedState(plant.A0() * x);
}

std::vector<AugmentedState> SimulateCss(const PlantModel& plant,
                                        const Css& css,
                                        const AugmentedState& x0) {
  if (css.empty()) throw std::invalid_argument("empty CSS");
  if (x0.size() != 2 * plant.n()) {
    throw DimensionError("augmented state must have length 2n");
  }
  const MatrixXd a1 = plant.A1();
  const MatrixXd a0 = plant.A0();
  std::vector<AugmentedState> traj;
  traj.reserve(css.size() + 1);
  traj.push_back(x0);
  for (bool b : css.bits()) {
    traj.push_back(b ? AugmentedState(a1 * traj.back())
                     : AugmentedState(a0 * traj.back()));
  }
  return traj;
}

std::vector<AugmentedState> SwitchedTrajectory(
    const std::vector<AugmentedState>& trajectory, const Css& css) {
  if (trajectory.size() != css.size() + 1) {
    throw DimensionError("trajectory length must be |css| + 1");
  }
  std::vector<AugmentedState> out;
  for (std::size_t t = 0; t < css.size(); ++t) {
    if (css.bits()[t]) out.push_back(trajectory[t]);
  }
  out.push_back(trajectory.back());
  return out;
}

namespace {

double SpectralRadius(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  double r = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    r = std::max(r, std::abs(es.eigenvalues()[i]));
  }
  return r;
}

// Orthonormal coordinates for symmetric matrices: diagonal entries, then
// off-diagonal entries scaled by sqrt(2).
VectorXd Svec(const MatrixXd& s) {
  const int n = static_cast<int>(s.rows());
  VectorXd v(n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      v(k++) = (i == j) ? s(i, j) : std::sqrt(2.0) * 0.5 * (s(i, j) + s(j, i));
    }
  }
  return v;
}

MatrixXd Smat(const VectorXd& v, int n) {
  MatrixXd s(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      if (i == j) {
        s(i, i) = v(k++);
      } else {
        s(i, j) = s(j, i) = v(k++) / std::sqrt(2.0);
      }
    }
  }
  return s;
}

MatrixXd ProjectPsd(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
  const VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lambda.asDiagonal() *
         es.eigenvectors().transpose();
}

// Solves X = F' X F + I for Schur-stable F.
MatrixXd DiscreteLyapunov(const MatrixXd& f) {
  const int n = static_cast<int>(f.rows());
  MatrixXd kron(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = f(j, i) * f.transpose();
    }
  }
  // vec(F' X F) = (F' kron F') vec(X) in column-major order.
  const MatrixXd lhs = MatrixXd::Identity(n * n, n * n) - kron;
  const VectorXd rhs = Eigen::Map<const VectorXd>(
      MatrixXd::Identity(n, n).eval().data(), n * n);
  VectorXd x = lhs.partialPivLu().solve(rhs);
  MatrixXd X = Eigen::Map<MatrixXd>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

void CheckShapes(const std::vector<MatrixXd>& ms, double gamma) {
  if (ms.empty()) throw std::invalid_argument("no subsequence matrices");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1)");
  }
  const auto n = ms.front().rows();
  for (const MatrixXd& m : ms) {
    if (m.rows() != m.cols()) throw DimensionError("M_i must be square");
    if (m.rows() != n) throw DimensionError("M_i dimensions differ");
  }
}

}  // namespace

bool VerifyClf(const std::vector<MatrixXd>& ms, const MatrixXd& P,
               double gamma) {
  const int n = static_cast<int>(P.rows());
  if (P.cols() != n || n == 0) return false;
  if (!P.allFinite()) return false;
  if ((P - P.transpose()).norm() > 1e-9 * std::max(1.0, P.norm())) {
    return false;
  }
  const double trace = P.trace();
  if (!(trace > 0.0)) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> pe(P, Eigen::EigenvaluesOnly);
  if (pe.eigenvalues().minCoeff() <= 1e-8 * trace / n) return false;
  for (const MatrixXd& m : ms) {
    if (m.rows() != n || m.cols() != n) return false;
    MatrixXd q = m.transpose() * P * m - gamma * gamma * P;
    q = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> qe(q, Eigen::EigenvaluesOnly);
    if (!(qe.eigenvalues().maxCoeff() < -1e-12 * trace)) return false;
  }
  return true;
}

ClfResult FindClf(const std::vector<MatrixXd>& ms, double gamma,
                  const ClfOptions& options) {
  CheckShapes(ms, gamma);
  ClfResult result;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (SpectralRadius(ms[i]) >= gamma) {
      result.reason = "subsequence " + std::to_string(i + 1) +
                      " has spectral radius >= gamma";
      return result;
    }
  }

  const int n = static_cast<int>(ms.front().rows());
  const double g2 = gamma * gamma;

  // Warm start: sum of the individual Lyapunov solutions.
  MatrixXd p0 = MatrixXd::Zero(n, n);
  for (const MatrixXd& m : ms) p0 += DiscreteLyapunov(m / gamma);
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(p0, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo > 0.0) p0 /= lo;
  }
  if (VerifyClf(ms, p0, gamma)) {
    result.feasible = true;
    result.P = p0;
    return result;
  }

  // Linear maps P -> gamma^2 P - M' P M in svec coordinates.
  const int d = n * (n + 1) / 2;
  std::vector<MatrixXd> g(ms.size(), MatrixXd(d, d));
  for (int k = 0; k < d; ++k) {
    VectorXd e = VectorXd::Zero(d);
    e(k) = 1.0;
    const MatrixXd basis = Smat(e, n);
    for (std::size_t i = 0; i < ms.size(); ++i) {
      g[i].col(k) =
          Svec(g2 * basis - ms[i].transpose() * basis * ms[i]);
    }
  }
  MatrixXd normal = MatrixXd::Identity(d, d);
  for (const MatrixXd& gi : g) normal += gi.transpose() * gi;
  const Eigen::LLT<MatrixXd> normal_llt(normal);
  const VectorXd offset = options.slack * Svec(MatrixXd::Identity(n, n));
  const MatrixXd eye = MatrixXd::Identity(n, n);

  VectorXd p = Svec(p0);
  std::vector<VectorXd> s(ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) s[i] = g[i] * p - offset;

  for (int it = 1; it <= options.max_iterations; ++it) {
    // Cones: P - I >= 0, S_i >= 0.
    const VectorXd p_hat = Svec(eye + ProjectPsd(Smat(p, n) - eye));
    VectorXd rhs = p_hat;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const VectorXd s_hat = Svec(ProjectPsd(Smat(s[i], n)));
      rhs += g[i].transpose() * (s_hat + offset);
    }
    // Affine set: S_i = gamma^2 P - M_i' P M_i - slack I.
    p = normal_llt.solve(rhs);
    for (std::size_t i = 0; i < ms.size(); ++i) s[i] = g[i] * p - offset;

    const MatrixXd candidate = Smat(p, n);
    if (VerifyClf(ms, candidate, gamma)) {
      result.feasible = true;
      result.P = candidate;
      result.iterations = it;
      return result;
    }
  }
  result.iterations = options.max_iterations;
  result.reason = "no certificate within iteration budget";
  return result;
}

ClfResult FindClf(const std::vector<SubseqDynamics>& subseqs, double gamma,
                  const ClfOptions& options) {
  std::vector<MatrixXd> ms;
  ms.reserve(subseqs.size());
  for (const SubseqDynamics& s : subseqs) ms.push_back(s.M);
  return FindClf(ms, gamma, options);
}

SkipLimitResult ComputeSkipLimit(const PlantModel& plant, double gamma,
                                 int i_max, const ClfOptions& options) {
  if (i_max < 1) throw std::invalid_argument("i_max must be >= 1");
  const std::vector<SubseqDynamics> all = BuildSubsequences(plant, i_max);
  std::vector<MatrixXd> ms{all[0].M};
  ClfResult base = FindClf(ms, gamma, options);
  if (!base.feasible) {
    throw UnstableBaselineError("closed loop is not " + std::to_string(gamma) +
                                "-stable without skips: " + base.reason);
  }
  SkipLimitResult out;
  out.limit = 0;
  out.P = base.P;
  for (int s = 2; s <= i_max; ++s) {
    ms.push_back(all[s - 1].M);
    ClfResult r = FindClf(ms, gamma, options);
    if (!r.feasible) break;
    out.limit = s - 1;
    out.P = r.P;
  }
  return out;
}

int SkipLimit(const PlantModel& plant, double gamma, int i_max) {
  return ComputeSkipLimit(plant, gamma, i_max).limit;
}

double GuesConstant(const MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw std::invalid_argument("P is not positive definite");
  return std::sqrt(hi / lo);
}

bool VerifyGues(const std::vector<AugmentedState>& trajectory, double M,
                double gamma) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  const double x0 = trajectory.front().norm();
  double envelope = M * x0;
  for (const AugmentedState& x : trajectory) {
    if (x.norm() > envelope * (1.0 + 1e-9) + 1e-300) return false;
    envelope *= gamma;
  }
  return true;
}

void WriteTrajectoryCsv(const std::vector<AugmentedState>& trajectory,
                        double M, double gamma, std::ostream& out) {
  out << "k,norm,envelope\n";
  if (trajectory.empty()) return;
  const double x0 = trajectory.front().norm();
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    out << k << ',' << trajectory[k].norm() << ','
        << M * std::pow(gamma, static_cast<double>(k)) * x0 << '\n';
  }
}

}  // namespace hns
