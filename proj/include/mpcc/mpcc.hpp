// SPDX-License-Identifier: Apache-2.0
//
// mpcc - multi-link multipath cluster identification and characterization
// Copyright (C) 2026 The mpcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MPCC_HPP
#define MPCC_HPP

#include "mpcc/core.hpp"
#include "mpcc/geometry.hpp"
#include "mpcc/mcd.hpp"
#include "mpcc/clustering.hpp"
#include "mpcc/tracking.hpp"
#include "mpcc/visibility.hpp"
#include "mpcc/inference.hpp"
#include "mpcc/clusterstats.hpp"
#include "mpcc/synth.hpp"
#include "mpcc/io.hpp"
#include "mpcc/pipeline.hpp"

#endif
