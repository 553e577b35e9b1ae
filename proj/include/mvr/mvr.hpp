// Copyright 2026 The MVR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/** \file mvr.hpp
 *  \brief Umbrella header for the retrieval engine.
 */

#include "mvr/ablation.hpp"
#include "mvr/cache.hpp"
#include "mvr/compensate.hpp"
#include "mvr/config.hpp"
#include "mvr/core.hpp"
#include "mvr/drift.hpp"
#include "mvr/embed_client.hpp"
#include "mvr/error.hpp"
#include "mvr/evaluate.hpp"
#include "mvr/http.hpp"
#include "mvr/keywords.hpp"
#include "mvr/parallel.hpp"
#include "mvr/prompts.hpp"
#include "mvr/reformulate.hpp"
#include "mvr/retrieve.hpp"
#include "mvr/store.hpp"
#include "mvr/synth.hpp"
