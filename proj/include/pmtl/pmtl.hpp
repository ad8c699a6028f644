// pmtl/pmtl.hpp

// Copyright 2026  The pmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pmtl/backend/scoring.hpp"
#include "pmtl/data/corpus.hpp"
#include "pmtl/data/preprocess.hpp"
#include "pmtl/eval/eer.hpp"
#include "pmtl/eval/trials.hpp"
#include "pmtl/model/checkpoint.hpp"
#include "pmtl/model/grad_registry.hpp"
#include "pmtl/model/losses.hpp"
#include "pmtl/numeric/grad_check.hpp"
#include "pmtl/train/trainer.hpp"
