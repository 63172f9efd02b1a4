#include <doctest.h>

#include "fixtures.hpp"
#include "sphertrunc/errors.hpp"
#include "sphertrunc/forward.hpp"
#include "sphertrunc/iterative.hpp"
#include "sphertrunc/perturb.hpp"

using namespace sphertrunc;

TEST_CASE("round trip through the forward map") {
  const auto lambda = fixtures::lambda_ex();
  int steps_small = 0, steps_large = 0;
  for (double rho : {2.0, 6.0, 40.0}) {
    const auto r = fixed_point_solve(forward_map(rho, lambda).mu, rho);
    CAPTURE(rho);
    CHECK(r.trace.converged);
    CHECK(fixtures::max_rel_error(r.lambda.vector(), lambda.vector()) < 1e-8);
    if (rho == 2.0) steps_small = r.trace.steps;
    if (rho == 40.0) steps_large = r.trace.steps;
  }
  CHECK(steps_small > steps_large);
}

TEST_CASE("agreement with the fourth-order expansion at weak truncation") {
  const auto lambda = fixtures::lambda_ex();
  const auto mu = forward_map(40.0, lambda).mu;
  const auto it = fixed_point_solve(mu, 40.0);
  const auto pt = reconstruct(mu, 40.0, 4);
  CHECK(fixtures::max_rel_error(pt.partial_sums[4], it.lambda.vector()) < 1e-3);
}

TEST_CASE("trace and failure reporting") {
  const auto lambda = fixtures::lambda_ex();
  const auto mu = forward_map(6.0, lambda).mu;
  FixedPointOptions opt;
  opt.max_iter = 3;
  try {
    fixed_point_solve(mu, 6.0, opt);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.trace().steps == 3);
    CHECK(e.trace().iterates.size() >= 3);
    CHECK_FALSE(e.trace().converged);
  }
  opt.max_iter = 10000;
  opt.damping = 0.5;
  const auto damped = fixed_point_solve(mu, 6.0, opt);
  CHECK(fixtures::max_rel_error(damped.lambda.vector(), lambda.vector()) < 1e-8);
  opt.damping = 1.5;
  CHECK_THROWS_AS(fixed_point_solve(mu, 6.0, opt), DomainError);
}
