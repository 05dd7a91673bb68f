#pragma once

#include "padicnn/padic.hpp"
#include "padicnn/kernel.hpp"
#include "padicnn/network.hpp"
#include "padicnn/observables.hpp"
#include "padicnn/evolution.hpp"
#include "padicnn/analysis.hpp"
#include "padicnn/scenario.hpp"
#include "padicnn/selfcheck.hpp"
