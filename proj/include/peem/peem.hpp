#pragma once

#include "peem/attribution.hpp"
#include "peem/bounded_lsq.hpp"
#include "peem/dataset.hpp"
#include "peem/errors.hpp"
#include "peem/evaluation.hpp"
#include "peem/events.hpp"
#include "peem/model.hpp"
#include "peem/model_io.hpp"
#include "peem/pipeline.hpp"
#include "peem/power_meter.hpp"
#include "peem/profile.hpp"
#include "peem/statistics.hpp"
#include "peem/subprocess.hpp"
#include "peem/synth.hpp"
