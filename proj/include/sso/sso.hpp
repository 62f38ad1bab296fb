#pragma once

// Umbrella header for the structural sensitivity and optimization toolkit.

#include "sso/core.hpp"
#include "sso/dual.hpp"
#include "sso/model.hpp"
#include "sso/elements.hpp"
#include "sso/assembly.hpp"
#include "sso/sparse_lu.hpp"
#include "sso/linsolve.hpp"
#include "sso/simp.hpp"
#include "sso/sensitivity.hpp"
#include "sso/optimize.hpp"
#include "sso/neural.hpp"
#include "sso/fixtures.hpp"
