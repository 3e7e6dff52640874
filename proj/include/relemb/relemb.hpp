#pragma once

#include "binary_io.hpp"
#include "categorize.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "index.hpp"
#include "matrix.hpp"
#include "neural.hpp"
#include "pipeline.hpp"
#include "reduce.hpp"
#include "reprs.hpp"
#include "sparse.hpp"
#include "synth.hpp"
#include "tasks.hpp"
