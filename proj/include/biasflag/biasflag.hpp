#pragma once

// Everything except the HTTP front (service_http.hpp), which pulls in httplib.
#include "biasflag/codes.hpp"
#include "biasflag/common.hpp"
#include "biasflag/config.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/dataset.hpp"
#include "biasflag/evaluation.hpp"
#include "biasflag/features.hpp"
#include "biasflag/hash.hpp"
#include "biasflag/labeling.hpp"
#include "biasflag/lexicon.hpp"
#include "biasflag/model.hpp"
#include "biasflag/pipeline.hpp"
#include "biasflag/random.hpp"
#include "biasflag/service.hpp"
#include "biasflag/synthetic.hpp"
