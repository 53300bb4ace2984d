// Copyright (C) 2026 The fpfixed Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include "fpfixed/errors.hpp"
#include "fpfixed/evaluation.hpp"
#include "fpfixed/fixed_template.hpp"
#include "fpfixed/gallery.hpp"
#include "fpfixed/image.hpp"
#include "fpfixed/minutiae_map.hpp"
#include "fpfixed/net/checkpoint.hpp"
#include "fpfixed/net/config.hpp"
#include "fpfixed/net/optimizer.hpp"
#include "fpfixed/net/toy_net.hpp"
#include "fpfixed/net/training.hpp"
#include "fpfixed/rng.hpp"
#include "fpfixed/spatial_transform.hpp"
#include "fpfixed/synth_data.hpp"
