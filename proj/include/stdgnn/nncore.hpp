#pragma once

#include "stdgnn/checkpoint.hpp"
#include "stdgnn/layers.hpp"
#include "stdgnn/optim.hpp"
#include "stdgnn/tensor.hpp"
