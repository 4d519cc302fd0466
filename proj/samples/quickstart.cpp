// Sample one scenario, run the alternating optimisation, audit the result and
// save it in the format read by `fcla_sim audit`.
#include "fcla/fcla.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv)
{
  using namespace fcla;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const std::string path = argc > 2 ? argv[2] : "quickstart_solution.txt";

  SamplingParams sp;
  sp.K = 3;
  sp.power_dbw = 6.0;
  const Scenario s = sample_scenario(seed, sp);
  const Placement start = initial_placement(s.config);

  const BcdResult r = run(s, start);
  for (const auto& row : r.trace)
    std::printf("iter %2d  sum rate %.6f bit/s/Hz  eve %.4f  moved %.3e m\n", row.iteration, row.sum_rate,
                row.eve_rate, row.moved);

  const Audit a = audit(s, r.placement, r.beams);
  std::printf("status %s  power %.4g / %.4g W  feasible %s\n", to_string(r.status), a.power_used, s.P,
              a.feasible(1e-6) ? "yes" : "no");

  // same scenario with the array frozen in place
  BcdOptions fixed;
  fixed.angles = fixed.heights = false;
  const BcdResult f = run(s, start, fixed);
  std::printf("fixed placement sum rate %.6f\n", f.trace.back().sum_rate);

  io::save_solution(path, s, r.placement, r.beams);
  std::printf("wrote %s\n", path.c_str());
  return a.feasible(1e-6) ? 0 : 1;
}
