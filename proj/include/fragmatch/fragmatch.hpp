#pragma once

// Umbrella header.

#include "fragmatch/breaking_curves.hpp"
#include "fragmatch/config.hpp"
#include "fragmatch/constants.hpp"
#include "fragmatch/eigen_sym3.hpp"
#include "fragmatch/evaluation.hpp"
#include "fragmatch/geometry.hpp"
#include "fragmatch/graph.hpp"
#include "fragmatch/parallel.hpp"
#include "fragmatch/pipeline.hpp"
#include "fragmatch/ply.hpp"
#include "fragmatch/registration.hpp"
#include "fragmatch/segmentation.hpp"
#include "fragmatch/spatial_index.hpp"
#include "fragmatch/transform_io.hpp"
