#pragma once

#include "hetfuse/cli.hpp"
#include "hetfuse/experiments.hpp"
#include "hetfuse/plotting.hpp"
