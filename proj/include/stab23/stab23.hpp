// Umbrella header for the stabilizing 2-3 tree library.
#pragma once

#include "stab23/arena.hpp"
#include "stab23/dot.hpp"
#include "stab23/harness.hpp"
#include "stab23/ops.hpp"
#include "stab23/semantics.hpp"
#include "stab23/snapshot.hpp"
