// Prints J_4 for GUE next to planted importance-sampling estimates of
// P(tr_N X_N^4 >= x) and the finite-n slope -log p / n^{3/2}.

#include <cstdio>
#include <cstdlib>

#include "rmtldp/rmtldp.hpp"

int main(int argc, char** argv) {
  using namespace rmtldp;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
  const EntrySource gue = GaussianProfile{1.0, 2};
  const auto spec = model_rate_spec(gue, 4);
  std::printf("%6s %6s %12s %12s %10s %8s\n", "x", "n", "p_hat", "stderr", "slope", "J_4(x)");
  for (double x : {2.5, 3.0, 4.0}) {
    for (std::size_t n : {8, 16, 32}) {
      const auto e = estimate_tail_planted_is(gue, n, 4, x, 20000, seed);
      std::printf("%6.2f %6zu %12.4e %12.4e %10.4f %8s\n", x, n, e.p_hat, e.stderr_, e.slope,
                  rate_value(spec, x).to_string().c_str());
    }
  }
}
