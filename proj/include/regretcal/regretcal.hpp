#pragma once

#include "regretcal/binning.hpp"
#include "regretcal/bounds.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/error.hpp"
#include "regretcal/grouping.hpp"
#include "regretcal/metrics.hpp"
#include "regretcal/pipeline.hpp"
#include "regretcal/recalibration.hpp"
#include "regretcal/regret.hpp"
#include "regretcal/svg.hpp"
#include "regretcal/synthetic.hpp"
