#pragma once

#include "hmcas/registers.hpp"
#include "hmcas/cas_object.hpp"
#include "hmcas/history.hpp"
#include "hmcas/machine.hpp"
#include "hmcas/lincheck.hpp"
#include "hmcas/linearization_points.hpp"
#include "hmcas/trace_io.hpp"
#include "hmcas/campaign.hpp"
#include "hmcas/bench.hpp"
