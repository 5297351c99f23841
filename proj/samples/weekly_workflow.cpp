// Daily close/volume CSV -> weekly dataset -> VF-ARMA fit -> 4-week forecast.
//
//   weekly_workflow [daily.csv]
// Without an argument the built-in synthetic fixture is used.

#include "vfvol/vfvol.hpp"

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
    using namespace vfvol;
    const RawDailySeries daily = argc > 1 ? read_daily_csv(argv[1]) : synthetic_daily_fixture();
    const VaryingFrequencyDataset ds = build_dataset(daily);
    const std::size_t h = 4;
    const auto [train, test] = split(ds, {ds.size() - h, h});
    std::printf("%zu daily rows -> %zu weeks (%zu train, %zu test)\n", daily.size(), ds.size(), train.size(),
                test.size());

    VfConfig cfg;
    const VfModelFit vf = fit_vf(train, cfg);
    const BenchmarkFit bench = fit_benchmark(train, BenchmarkKind::Garch);
    std::printf("vf-arma: converged=%s after %d iterations\n", vf.converged ? "true" : "false", vf.iterations);

    const std::vector<double> zeros(train.size(), 0.0);
    std::printf("in-sample RMSE  vf-arma %.5f  garch %.5f\n", rmse(vf.residuals, zeros), rmse(bench.residuals, zeros));
    std::printf("in-sample MAD   vf-arma %.5f  garch %.5f\n", mad(vf.residuals, zeros), mad(bench.residuals, zeros));

    const auto fc_vf = forecast_vf(vf, test, h);
    const auto fc_b = forecast_benchmark(bench, test, h);
    std::cout << "week  actual     vf-arma    garch\n";
    for (std::size_t s = 0; s < h; ++s)
        std::printf("%4zu  %9.5f  %9.5f  %9.5f\n", s + 1, test.y[s], fc_vf[s], fc_b[s]);
    std::printf("MdAPE  vf-arma %.1f%%  garch %.1f%%\n", mdape(test.y, fc_vf).value, mdape(test.y, fc_b).value);
}
