// Copyright 2026 The logitmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// @file dsl.hpp
/// @brief A small pure expression language over P, LP, Y, TP and TLP in which
/// generated strategies are written, parsed, cost-checked and evaluated.

#include "logitmia/dsl/ast.hpp"
#include "logitmia/dsl/builtins.hpp"
#include "logitmia/dsl/evaluate.hpp"
#include "logitmia/dsl/parser.hpp"
#include "logitmia/dsl/program.hpp"
