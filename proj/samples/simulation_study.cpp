// Small Monte Carlo comparison on one simulated scenario.
//
//   simulation_study [replicates] [workers]

#include "vfvol/vfvol.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    using namespace vfvol;
    ScenarioConfig sc;
    sc.T = 255;
    sc.psi_weight = 0.5;

    ExperimentOptions opt;
    opt.replicates = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20;
    opt.workers = argc > 2 ? static_cast<unsigned>(std::strtoul(argv[2], nullptr, 10)) : 1;
    opt.master_seed = 2024;

    const auto report = run_experiment({sc}, {ModelId::VfArma, ModelId::VfGarch, ModelId::Garch, ModelId::Gjr}, opt);
    write_report_table(std::cout, report);

    const auto* vf = report.find(scenario_id(sc), ModelId::VfArma);
    const auto* bench = report.find(scenario_id(sc), ModelId::Garch);
    if (vf && bench) std::cout << "\nRMSE ratio vf-arma / garch: " << vf->mean_rmse / bench->mean_rmse << '\n';
}
