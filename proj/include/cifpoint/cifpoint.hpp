#pragma once

#include "cifpoint/errors.hpp"
#include "cifpoint/data.hpp"
#include "cifpoint/cif.hpp"
#include "cifpoint/variance.hpp"
#include "cifpoint/distributions.hpp"
#include "cifpoint/fixed_time_tests.hpp"
#include "cifpoint/pseudo_gee.hpp"
#include "cifpoint/simulation.hpp"
#include "cifpoint/anova.hpp"
#include "cifpoint/io.hpp"
