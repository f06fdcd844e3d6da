#pragma once

#include "aqi/cohort.hpp"
#include "aqi/features.hpp"
#include "aqi/pipeline.hpp"
#include "aqi/qp_optimizer.hpp"
#include "aqi/regression.hpp"
#include "aqi/scoring.hpp"
#include "aqi/screening.hpp"
#include "aqi/service.hpp"
#include "aqi/siamese.hpp"
