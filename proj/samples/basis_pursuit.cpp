// Basis pursuit min ||x||_1 s.t. Ax = y with DR: solve, find where the support settles,
// and compare the predicted local rate with the measured one.

#include <cstdio>

#include "drps/dr.hpp"
#include "drps/random.hpp"
#include "drps/rate.hpp"

int main() {
  using namespace drps;
  const Index m = 12, n = 40;
  Rng rng(7);
  const Matrix a = rng.normal_matrix(m, n);
  Vector x0 = Vector::Zero(n);
  for (Index i : rng.choose(n, 3)) x0(i) = rng.normal();

  const L1Norm j(n);
  const AffineIndicator g(a, a * x0);
  const double gamma = 0.5;
  const auto schedule = RelaxationSchedule::constant(1.0);

  const Reference ref = compute_reference(j, g, gamma, Vector::Zero(n));
  SolveOptions opts;
  opts.reference = &ref;
  const ConvergenceLog log = solve(j, g, gamma, schedule, Vector::Zero(n), {20000, 1e-13}, opts);
  const auto k = identification_index(log);

  const RateModel model = linearize(j, g, ref, gamma, 1.0);
  std::printf("iterations %ld, support identified at k = %ld\n", log.iterations(), k.value_or(-1));
  std::printf("recovery error %.3g\n", (ref.x - x0).norm());
  std::printf("theta_F %.6f\n", friedrichs_angle(model.tj, model.tg));
  std::printf("predicted rate %.6f (eigensolve %.6f)\n", polyhedral_rate(model.tj, model.tg, 1.0), model.predicted_rate);
  if (k) std::printf("observed rate  %.6f\n", observed_rate(log, *k));
  return 0;
}
