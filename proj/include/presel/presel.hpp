#pragma once

#include "presel/budgeting.hpp"
#include "presel/config.hpp"
#include "presel/error.hpp"
#include "presel/features.hpp"
#include "presel/geometry.hpp"
#include "presel/losses.hpp"
#include "presel/manifest.hpp"
#include "presel/relevance.hpp"
#include "presel/selector.hpp"
#include "presel/synth.hpp"
#include "presel/util.hpp"
#include "presel/validation.hpp"
