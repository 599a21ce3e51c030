#pragma once

#include "qalloc/agent.hpp"
#include "qalloc/analytics.hpp"
#include "qalloc/config.hpp"
#include "qalloc/date.hpp"
#include "qalloc/environment.hpp"
#include "qalloc/errors.hpp"
#include "qalloc/market_data.hpp"
#include "qalloc/pipeline.hpp"
#include "qalloc/qnet.hpp"
#include "qalloc/rng.hpp"
#include "qalloc/synth.hpp"
#include "qalloc/weights.hpp"
