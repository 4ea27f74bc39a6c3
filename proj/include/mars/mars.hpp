// Copyright 2026 The mars-context Authors
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

#include "mars/backends.hpp"
#include "mars/config.hpp"
#include "mars/core.hpp"
#include "mars/decoding.hpp"
#include "mars/embedding_io.hpp"
#include "mars/error.hpp"
#include "mars/metrics.hpp"
#include "mars/retrieval.hpp"
#include "mars/selection.hpp"
#include "mars/similarity.hpp"
#include "mars/synthetic.hpp"
#include "mars/text_embedder.hpp"
#include "mars/types.hpp"
