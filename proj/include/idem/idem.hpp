#pragma once

#include "idem/curve_io.hpp"
#include "idem/embedding_io.hpp"
#include "idem/embeddings.hpp"
#include "idem/error.hpp"
#include "idem/metrics.hpp"
#include "idem/naive_oracle.hpp"
#include "idem/pair_engine.hpp"
#include "idem/synthgen.hpp"
#include "idem/version.hpp"
#include "idem/gan/checkpoint.hpp"
#include "idem/gan/losses.hpp"
#include "idem/gan/mlp.hpp"
#include "idem/gan/model.hpp"
#include "idem/gan/negative_pool.hpp"
#include "idem/gan/optimizer.hpp"
#include "idem/gan/train.hpp"
#include "idem/config.hpp"
#include "idem/gan/gradcheck.hpp"
