// Barycenter of nested-ellipse images with the greedy and reference
// algorithms, compared against the pairwise lower bound. The greedy
// barycenter is rasterized to ellipse_barycenter.pgm.

#include <cmath>
#include <cstdio>

#include "motbary/motbary.hpp"

using namespace motbary;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 10;
  const std::size_t res = argc > 2 ? std::stoul(argv[2]) : 32;
  const auto measures = gen_nested_ellipses(n, res, 7);
  const auto weights = SimplexWeights::uniform(n);

  W2Cache cache;
  const double lb = pairwise_lower_bound(measures, weights, &cache);
  for (auto algo : {Algorithm::greedy, Algorithm::reference}) {
    const auto plan = solve_mot(measures, weights, algo);
    const double phi = phi_cost(plan, weights);
    std::printf("%-10s Phi=%.6g  Phi/LB=%.4f  atoms=%zu (bound %zu)\n", to_string(algo), phi, phi / lb,
                plan.size(), sparsity_bound(plan));
    if (algo != Algorithm::greedy) continue;

    const auto bary = pushforward_mean(plan, weights);
    std::vector<double> acc(res * res, 0.0);
    double peak = 0.0;
    for (std::size_t j = 0; j < bary.size(); ++j) {
      const auto p = bary.point(j);
      const auto c = std::min(res - 1, static_cast<std::size_t>(std::lround(p[0] * res)));
      const auto r = std::min(res - 1, static_cast<std::size_t>(std::lround(p[1] * res)));
      acc[r * res + c] += bary.weight(j);
      peak = std::max(peak, acc[r * res + c]);
    }
    GrayImage img(res, res);
    for (std::size_t k = 0; k < acc.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(255.0 * acc[k] / peak);
    save_pgm("ellipse_barycenter.pgm", img);
  }
  return 0;
}
