#pragma once

// Umbrella header.

#include "lsg/core.hpp"
#include "lsg/corpus.hpp"
#include "lsg/engine.hpp"
#include "lsg/errors.hpp"
#include "lsg/experiment.hpp"
#include "lsg/external_provider.hpp"
#include "lsg/metrics.hpp"
#include "lsg/policy.hpp"
#include "lsg/providers.hpp"
