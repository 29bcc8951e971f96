#pragma once

// Umbrella header.

#include "lvchaos/errors.hpp"
#include "lvchaos/model.hpp"
#include "lvchaos/integrate.hpp"
#include "lvchaos/geometry.hpp"
#include "lvchaos/twist.hpp"
#include "lvchaos/sap.hpp"
#include "lvchaos/symbolic.hpp"
#include "lvchaos/io.hpp"
