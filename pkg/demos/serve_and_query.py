# Stand up the inference API in-process and hit every endpoint. The same app
# serves over the network via `woundfuse serve --checkpoint ...`; here we use
# the in-process test client so the demo runs anywhere, no ports involved.

import io
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient
from PIL import Image

from woundfuse.blocks import AxialAttentionConfig, GatedMlpConfig
from woundfuse.bodymap import default_registry
from woundfuse.dataset import split_dataset
from woundfuse.model import BackboneSpec, ModelConfig
from woundfuse.service import create_app
from woundfuse.synthetic import write_synthetic_dataset
from woundfuse.training import TrainConfig, train

OUT = Path(__file__).resolve().parent / "output"


def quick_checkpoint():
    """One-epoch location-aware model over two synthetic classes."""
    root = Path(tempfile.mkdtemp(prefix="serve_demo_"))
    manifest = write_synthetic_dataset(root, classes=("D", "V"), per_class=8, size=32,
                                       seed=5, with_locations=True)
    split = split_dataset(manifest, "60-15-25", seed=5)
    cfg = ModelConfig(
        num_classes=2,
        use_location=True,
        input_size=32,
        backbones=tuple(BackboneSpec(family=f, truncation="stem_v1", pretrained=False)
                        for f in ("resnet152", "vgg16", "efficientnet_b2")),
        agg_channels=(16,),
        flatten_dim=16,
        head_widths=(16,),
        head_attention=AxialAttentionConfig(embed_dim=8, heads=1, axes=("tokens",)),
        location_branch=GatedMlpConfig(input_dim=484, hidden_dims=(16,), output_dim=8,
                                       attention_embed_dim=1),
    )
    train_cfg = TrainConfig(epochs=1, batch_size=4, learning_rate=1e-3, seed=5, augment=None)
    OUT.mkdir(exist_ok=True)
    result = train(cfg, split, train_cfg, registry=default_registry(),
                   out_dir=OUT / "serve_run", model_id="demo")
    return result.checkpoint_path


def png_bytes(color=(180, 60, 60)):
    buf = io.BytesIO()
    Image.new("RGB", (32, 32), color).save(buf, format="PNG")
    return buf.getvalue()


def main():
    checkpoint = quick_checkpoint()
    print(f"checkpoint: {checkpoint}")

    client = TestClient(create_app(checkpoint_path=checkpoint))

    health = client.get("/api/v1/health").json()
    print(f"\nGET /api/v1/health -> {health}")

    regions = client.get("/api/v1/bodymap").json()["regions"]
    named = [r for r in regions if not r["name"].startswith("Body Region")]
    print(f"GET /api/v1/bodymap -> {len(regions)} regions, e.g. {named[0]}")

    # a prediction needs an image upload plus, for this model, a location code
    resp = client.post(
        "/api/v1/predict",
        files={"image": ("wound.png", png_bytes(), "image/png")},
        data={"location_code": "135"},
    )
    body = resp.json()
    print(f"\nPOST /api/v1/predict (code 135) -> {resp.status_code}")
    print(f"  predicted_class: {body['predicted_class']}")
    print(f"  probabilities:   { {k: round(v, 3) for k, v in body['probabilities'].items()} }")
    print(f"  location:        {body['location']}")

    # the API refuses underspecified or malformed requests with useful errors
    missing = client.post("/api/v1/predict",
                          files={"image": ("wound.png", png_bytes(), "image/png")})
    print(f"\nno location_code      -> {missing.status_code}: {missing.json()['detail']}")

    bad_code = client.post("/api/v1/predict",
                           files={"image": ("wound.png", png_bytes(), "image/png")},
                           data={"location_code": "9999"})
    print(f"unknown location_code -> {bad_code.status_code}: {bad_code.json()['detail']}")

    not_an_image = client.post("/api/v1/predict",
                               files={"image": ("nope.txt", b"plain text", "text/plain")},
                               data={"location_code": "135"})
    print(f"undecodable upload    -> {not_an_image.status_code}: {not_an_image.json()['detail']}")


if __name__ == "__main__":
    main()
