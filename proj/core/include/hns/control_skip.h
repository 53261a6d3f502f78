#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hns {

// Discrete plant with an observer-based controller:
//   x+ = A x + B u,  y = C x,  u = K xhat,  xhat+ = A xhat + B u + L (y - C xhat)
struct PlantModel {
  Eigen::MatrixXd A, B, C, K, L;

  int n() const { return static_cast<int>(A.rows()); }
  // Throws DimensionError unless A: n x n, B: n x m, C: p x n, K: m x n,
  // L: n x p.
  void Validate() const;

  // Augmented dynamics over X = [x; xhat] when the controller runs.
  Eigen::MatrixXd A1() const;
  // ... and when it is skipped: estimate frozen, last input reused.
  Eigen::MatrixXd A0() const;
};

using AugmentedState = Eigen::VectorXd;

// Control skipping sequence: 1 = executed, 0 = skipped.
class Css {
 public:
  Css() = default;
  explicit Css(std::vector<bool> bits) : bits_(std::move(bits)) {}
  // Parses a string of '0'/'1'.
  static Css Parse(std::string_view text);

  const std::vector<bool>& bits() const { return bits_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  std::string ToString() const;

  int LongestZeroRun() const;
  // Lengths of the 1 0^(i-1) blocks. Requires the sequence to start with 1.
  std::vector<int> Subsequences() const;
  // True if it starts with 1 and no zero run exceeds `skip_limit`.
  bool Respects(int skip_limit) const;

 private:
  std::vector<bool> bits_;
};

struct SubseqDynamics {
  int i = 1;
  Eigen::MatrixXd M;  // A0^(i-1) * A1
};

// M_1 .. M_max_len for a plant.
std::vector<SubseqDynamics> BuildSubsequences(const PlantModel& plant,
                                              int max_len);

AugmentedState Step(const PlantModel& plant, const AugmentedState& x,
                    bool executed);

// States X[0..|css|] visited while following the sequence.
std::vector<AugmentedState> SimulateCss(const PlantModel& plant,
                                        const Css& css,
                                        const AugmentedState& x0);

// States at the start of each subsequence plus the final state, i.e. the
// trajectory of the switched system whose steps are whole subsequences.
std::vector<AugmentedState> SwitchedTrajectory(
    const std::vector<AugmentedState>& trajectory, const Css& css);

struct ClfOptions {
  int max_iterations = 10000;
  // Required slack in gamma^2 P - M' P M >= slack * I, with P >= I.
  double slack = 1e-3;
};

struct ClfResult {
  bool feasible = false;
  Eigen::MatrixXd P;
  int iterations = 0;
  std::string reason;
};

// Looks for one symmetric P > 0 with M_i' P M_i - gamma^2 P < 0 for every
// i. Alternating projections between the affine set tying slack matrices to
// P and the positive semidefinite cones. Every returned P has passed
// VerifyClf. Throws DimensionError for non-square or mismatched matrices and
// std::invalid_argument for gamma outside (0, 1).
ClfResult FindClf(const std::vector<Eigen::MatrixXd>& ms, double gamma,
                  const ClfOptions& options = {});
ClfResult FindClf(const std::vector<SubseqDynamics>& subseqs, double gamma,
                  const ClfOptions& options = {});

// Definitional check: P symmetric with min eigenvalue above
// 1e-8 * trace(P) / dim, and every M_i' P M_i - gamma^2 P negative definite.
bool VerifyClf(const std::vector<Eigen::MatrixXd>& ms,
               const Eigen::MatrixXd& P, double gamma);

struct SkipLimitResult {
  int limit = 0;
  Eigen::MatrixXd P;  // certificate for subsequences 1 .. limit+1
};

// Largest number of consecutive skips s-1 such that subsequences
// {1, 10, ..., 10^(s-1)} share a CLF, searching s = 1..i_max. Throws
// UnstableBaselineError when even {1} fails.
SkipLimitResult ComputeSkipLimit(const PlantModel& plant, double gamma,
                                 int i_max, const ClfOptions& options = {});
int SkipLimit(const PlantModel& plant, double gamma, int i_max);

// sqrt(cond(P)): bounds ||X[k]|| / ||X[0]|| when V = X'PX contracts.
double GuesConstant(const Eigen::MatrixXd& P);

// True iff ||X[k]|| <= M gamma^k ||X[0]|| for every k (relative slack 1e-9).
bool VerifyGues(const std::vector<AugmentedState>& trajectory, double M,
                double gamma);

// Columns: k, norm, envelope.
void WriteTrajectoryCsv(const std::vector<AugmentedState>& trajectory,
                        double M, double gamma, std::ostream& out);

}  // namespace hns
