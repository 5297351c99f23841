#pragma once

#include "vfvol/arma.hpp"
#include "vfvol/benchmarks.hpp"
#include "vfvol/config.hpp"
#include "vfvol/dataset.hpp"
#include "vfvol/garch.hpp"
#include "vfvol/metrics.hpp"
#include "vfvol/model_io.hpp"
#include "vfvol/optim.hpp"
#include "vfvol/simgen.hpp"
#include "vfvol/smooth.hpp"
#include "vfvol/vfmodels.hpp"
