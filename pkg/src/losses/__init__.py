#!/usr/bin/env python3

from .formulations import (
    LossConfig, VARIANTS, SEPARATE_VARIANTS,
    L1_ONLY, JOINT_GAUSSIAN, JOINT_LAPLACE, SEPARATE_LAPLACE, SEPARATE_NO_VR,
    loss_joint_gaussian, loss_joint_laplace, loss_separate,
    error_estimate, predicted_error, batch_loss,
)
