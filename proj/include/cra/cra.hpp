#pragma once

#include "cra/clustering.hpp"
#include "cra/diagnostics.hpp"
#include "cra/ensembles.hpp"
#include "cra/experiments.hpp"
#include "cra/ingestion.hpp"
#include "cra/linalg.hpp"
#include "cra/matrix.hpp"
#include "cra/pipeline.hpp"
#include "cra/rng.hpp"
#include "cra/solvers.hpp"
