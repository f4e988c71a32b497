"""Export torchvision VGG-16 to ONNX with the layer3 and layer14 taps.

Layers are counted over the conv and pool stages in order, so layer3 is
pool1 (features.4, stride 2, 64 channels) and layer14 is pool4
(features.23, stride 16, 512 channels). Both activations become graph
outputs; the sidecar `<out>.json` maps the tags onto the output names.

    pip install "torch>=2.5" torchvision onnx
    python scripts/export_vgg16.py --out models/vgg16.onnx
    motionbox detect --pair a.png b.png --features deep \
        --model models/vgg16.onnx --layer layer14
"""

import argparse
import json
from pathlib import Path

import torch
import torchvision

TAPS = {
    "layer3": {"index": 4, "stride": 2, "channels": 64},
    "layer14": {"index": 23, "stride": 16, "channels": 512},
}


class Tapped(torch.nn.Module):
    def __init__(self, features, last):
        super().__init__()
        self.features = features[: last + 1]

    def forward(self, x):
        outs = []
        for i, layer in enumerate(self.features):
            x = layer(x)
            if any(t["index"] == i for t in TAPS.values()):
                outs.append(x)
        return tuple(outs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--opset", type=int, default=13)
    ap.add_argument("--untrained", action="store_true", help="random weights, for plumbing tests")
    args = ap.parse_args()

    weights = None if args.untrained else torchvision.models.VGG16_Weights.IMAGENET1K_V1
    vgg = torchvision.models.vgg16(weights=weights).eval()
    ordered = sorted(TAPS.items(), key=lambda kv: kv[1]["index"])
    model = Tapped(vgg.features, ordered[-1][1]["index"])
    names = [f"features.{t['index']}" for _, t in ordered]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    dummy = torch.zeros(1, 3, 224, 224)
    dynamic = {"input": {2: "h", 3: "w"}}
    dynamic.update({n: {2: f"{n}_h", 3: f"{n}_w"} for n in names})
    torch.onnx.export(
        model,
        dummy,
        str(args.out),
        input_names=["input"],
        output_names=names,
        dynamic_axes=dynamic,
        opset_version=args.opset,
        dynamo=False,
    )

    sidecar = {
        "mean": [0.485, 0.456, 0.406],
        "std": [0.229, 0.224, 0.225],
        "taps": {
            tag: {"output": f"features.{t['index']}", "stride": t["stride"], "channels": t["channels"]}
            for tag, t in TAPS.items()
        },
    }
    Path(str(args.out) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


if __name__ == "__main__":
    main()
