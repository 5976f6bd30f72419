#pragma once

#include "rismask/binary_io.hpp"
#include "rismask/config.hpp"
#include "rismask/constants.hpp"
#include "rismask/em_core.hpp"
#include "rismask/errors.hpp"
#include "rismask/experiment.hpp"
#include "rismask/mask_design.hpp"
#include "rismask/measurement.hpp"
#include "rismask/random.hpp"
#include "rismask/reconstruct.hpp"
#include "rismask/ris_synthesis.hpp"
#include "rismask/scene.hpp"
#include "rismask/targets.hpp"
