#!/usr/bin/env python3

from .config_eval import ConfigEval