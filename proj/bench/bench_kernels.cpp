// Serial versus OpenMP timings for the data-parallel kernels.
//
//   fbdnn_bench [samples_per_class] [features] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <vector>

#include <omp.h>

#include "fbdnn/kernels.hpp"
#include "fbdnn/lassonet.hpp"
#include "fbdnn/simgen.hpp"

using namespace fbdnn;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  SimDesign design;
  design.model = 1;
  design.n_per_class = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  design.p = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 50;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 5;

  const auto data = gen_model(design);
  const auto basis = BasisSpec::uniform(data.feature_grids, 6);
  const Projector projector(data.feature_grids, basis);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  const auto arch = Architecture::for_task(basis.truncations(), {300, 300}, 3,
                                           LossKind::cross_entropy);
  const auto params = init_params(arch, 1);
  const int threads = omp_get_max_threads();

  std::printf("samples=%zu features=%zu threads=%d\n", data.size(), data.num_features(),
              threads);
  std::printf("%-12s %12s %12s %8s %s\n", "kernel", "serial_s", "parallel_s", "speedup",
              "identical");

  ScoreMatrix s_serial, s_par;
  const double ps = best_of(repeats, [&] { s_serial = project_rows_serial(data, rows, projector); });
  const double pp = best_of(repeats, [&] { s_par = project_rows(data, rows, projector, threads); });
  std::printf("%-12s %12.5f %12.5f %8.2f %s\n", "project", ps, pp, ps / pp,
              s_serial == s_par ? "yes" : "NO");

  std::vector<double> o_serial, o_par;
  const double fs = best_of(repeats, [&] { o_serial = predict_outputs_serial(params, s_serial); });
  const double fp = best_of(repeats, [&] { o_par = predict_outputs(params, s_serial, threads); });
  std::printf("%-12s %12.5f %12.5f %8.2f %s\n", "predict", fs, fp, fs / fp,
              o_serial == o_par ? "yes" : "NO");
  return (s_serial == s_par && o_serial == o_par) ? 0 : 1;
}
