#pragma once

#include "probekit/battery.hpp"
#include "probekit/compfeat.hpp"
#include "probekit/config.hpp"
#include "probekit/error.hpp"
#include "probekit/evaluation.hpp"
#include "probekit/extraction.hpp"
#include "probekit/isomer.hpp"
#include "probekit/matrix.hpp"
#include "probekit/matrixio.hpp"
#include "probekit/parallel.hpp"
#include "probekit/probes/gbt.hpp"
#include "probekit/probes/logistic.hpp"
#include "probekit/probes/metrics.hpp"
#include "probekit/probes/mlp.hpp"
#include "probekit/probes/ridge.hpp"
#include "probekit/random.hpp"
#include "probekit/report.hpp"
#include "probekit/residual.hpp"
#include "probekit/stats.hpp"
#include "probekit/svg.hpp"
#include "probekit/synthgen.hpp"
