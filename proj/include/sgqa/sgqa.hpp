#pragma once

#include "sgqa/error.hpp"
#include "sgqa/families.hpp"
#include "sgqa/generator.hpp"
#include "sgqa/interpreter.hpp"
#include "sgqa/json_io.hpp"
#include "sgqa/kernels/grad_check.hpp"
#include "sgqa/kernels/layers.hpp"
#include "sgqa/kernels/matrix.hpp"
#include "sgqa/kernels/model.hpp"
#include "sgqa/program.hpp"
#include "sgqa/rng.hpp"
#include "sgqa/scene_graph.hpp"
#include "sgqa/stats.hpp"
