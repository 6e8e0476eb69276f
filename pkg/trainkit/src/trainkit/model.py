"""Ring-boundary segmentation network: ResNet18 encoder, transposed-conv decoder.

The architecture is deliberately restricted to Conv / BatchNorm / ReLU /
MaxPool / residual Add / ConvTranspose / Concat so the exported ONNX graph
stays inside the operator subset the detection package executes. Input sizes
must be divisible by 32.
"""

from __future__ import annotations

import torch
import torch.nn as nn
from torchvision.models import resnet18


class DoubleConv(nn.Module):
    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UpBlock(nn.Module):
    """Transposed-conv upsampling, skip concatenation, double conv."""

    def __init__(self, cin: int, skip: int, cout: int):
        super().__init__()
        self.up = nn.ConvTranspose2d(cin, cout, 2, stride=2)
        self.conv = DoubleConv(cout + skip, cout)

    def forward(self, x, skip):
        x = self.up(x)
        return self.conv(torch.cat([x, skip], dim=1))


class RingSegmentationNet(nn.Module):
    """Encoder-decoder with skip connections; emits per-pixel logits."""

    def __init__(self, pretrained: bool = False):
        super().__init__()
        weights = "IMAGENET1K_V1" if pretrained else None
        encoder = resnet18(weights=weights)
        self.conv1 = encoder.conv1
        self.bn1 = encoder.bn1
        self.relu = encoder.relu
        self.maxpool = encoder.maxpool
        self.layer1 = encoder.layer1
        self.layer2 = encoder.layer2
        self.layer3 = encoder.layer3
        self.layer4 = encoder.layer4

        self.up4 = UpBlock(512, 256, 256)
        self.up3 = UpBlock(256, 128, 128)
        self.up2 = UpBlock(128, 64, 64)
        self.up1 = UpBlock(64, 64, 32)
        self.up0 = nn.ConvTranspose2d(32, 16, 2, stride=2)
        self.out_conv = DoubleConv(16, 16)
        self.head = nn.Conv2d(16, 1, 1)

    def forward(self, x):
        c1 = self.relu(self.bn1(self.conv1(x)))   # stride 2, 64 ch
        m = self.maxpool(c1)                      # stride 4
        l1 = self.layer1(m)                       # stride 4, 64 ch
        l2 = self.layer2(l1)                      # stride 8, 128 ch
        l3 = self.layer3(l2)                      # stride 16, 256 ch
        l4 = self.layer4(l3)                      # stride 32, 512 ch
        d4 = self.up4(l4, l3)
        d3 = self.up3(d4, l2)
        d2 = self.up2(d3, l1)
        d1 = self.up1(d2, c1)
        d0 = self.out_conv(self.up0(d1))
        return self.head(d0)


def dice_loss(logits: torch.Tensor, target: torch.Tensor,
              eps: float = 1.0) -> torch.Tensor:
    """Soft Dice loss on sigmoid probabilities, averaged over the batch."""
    probs = torch.sigmoid(logits).reshape(logits.shape[0], -1)
    target = target.reshape(target.shape[0], -1).float()
    inter = (probs * target).sum(dim=1)
    denom = probs.sum(dim=1) + target.sum(dim=1)
    dice = (2 * inter + eps) / (denom + eps)
    return 1.0 - dice.mean()
