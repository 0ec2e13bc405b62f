# Poke at the three building blocks in isolation: the parallel
# squeeze-and-excitation gate, axial attention, and the gated location MLP.
# Everything runs on random tensors so it is fast and offline.

import torch

from woundfuse.blocks import (
    AdaptiveGatedMlp,
    AxialAttention,
    AxialAttentionConfig,
    ConvBlock,
    GatedMlpConfig,
    PscSE,
    PscseConfig,
)

torch.manual_seed(0)


def main():
    # --- conv block: conv + norm + relu, shape-preserving on the spatial grid
    block = ConvBlock(16, 32)
    x = torch.randn(2, 16, 24, 24)
    print(f"ConvBlock(16 -> 32): {tuple(x.shape)} -> {tuple(block(x).shape)}")

    # --- P_scSE: channel and spatial gates applied in parallel
    for combine in ("maxout_plus_add", "add", "max"):
        gate = PscSE(PscseConfig(channels=32, reduction_ratio=8, combine_mode=combine)).eval()
        y = gate(torch.randn(2, 32, 24, 24))
        zeros = gate(torch.zeros(2, 32, 24, 24))
        print(f"PscSE combine={combine:<16} out {tuple(y.shape)}, "
              f"zero input -> max |out| = {zeros.abs().max():.1f}")

    # --- axial attention over the token axis, weights are row-stochastic
    attn = AxialAttention(AxialAttentionConfig(embed_dim=16, heads=2, axes=("tokens",))).eval()
    tokens = torch.randn(4, 10, 16)
    out, weights = attn(tokens, return_weights=True)
    w = weights[0]
    print(f"\nAxialAttention tokens: {tuple(tokens.shape)} -> {tuple(out.shape)}, "
          f"weights {tuple(w.shape)}")
    print(f"  attention rows sum to {w.sum(-1).min():.6f}..{w.sum(-1).max():.6f}")

    # over image axes it attends along height and width separately;
    # planar inputs are channels-last: (batch, height, width, embed)
    planar = AxialAttention(AxialAttentionConfig(embed_dim=8, heads=1, axes=("height", "width"))).eval()
    fmap = torch.randn(2, 12, 12, 8)
    out, weights = planar(fmap, return_weights=True)
    print(f"AxialAttention height+width: {tuple(fmap.shape)} -> {tuple(out.shape)}, "
          f"{len(weights)} weight maps")

    # --- gated MLP: turns a one-hot location code into a dense feature,
    # with a learned per-sample gate on each hidden layer
    mlp = AdaptiveGatedMlp(GatedMlpConfig(input_dim=484, hidden_dims=(256, 128),
                                          output_dim=64, attention_embed_dim=1)).eval()
    onehot = torch.zeros(3, 484)
    onehot[torch.arange(3), torch.tensor([134, 177, 201])] = 1.0
    feat = mlp(onehot)
    print(f"\nAdaptiveGatedMlp: one-hot {tuple(onehot.shape)} -> feature {tuple(feat.shape)}")
    print(f"  distinct codes give distinct features: "
          f"{not torch.allclose(feat[0], feat[1])}")

    params = sum(p.numel() for p in mlp.parameters())
    print(f"  location branch parameter count: {params:,}")


if __name__ == "__main__":
    main()
