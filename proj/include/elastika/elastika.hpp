#pragma once

/// @brief Umbrella header for the elastika library.

#include "elastika/align.hpp"
#include "elastika/curves.hpp"
#include "elastika/errors.hpp"
#include "elastika/features.hpp"
#include "elastika/io.hpp"
#include "elastika/landmarks.hpp"
#include "elastika/modes.hpp"
#include "elastika/pipeline.hpp"
#include "elastika/regress.hpp"
#include "elastika/sphere.hpp"
#include "elastika/srvf.hpp"
#include "elastika/synth.hpp"
#include "elastika/tables.hpp"
