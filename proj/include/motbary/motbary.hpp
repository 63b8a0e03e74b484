#pragma once

/// Umbrella header for the whole library.

#include "motbary/analysis.hpp"
#include "motbary/cost.hpp"
#include "motbary/error.hpp"
#include "motbary/exact_oracle.hpp"
#include "motbary/image.hpp"
#include "motbary/instance_gen.hpp"
#include "motbary/io.hpp"
#include "motbary/measures.hpp"
#include "motbary/mot_approx.hpp"
#include "motbary/ot2.hpp"
#include "motbary/pipeline.hpp"
