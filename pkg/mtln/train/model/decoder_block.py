from mtln.train import functional as F


def decoder_block_shapes(in_channels, skip_channels, out_channels):
    return {
        "conv1.kernel": (out_channels, in_channels + skip_channels, 3, 3),
        "conv1.bias": (out_channels,),
        "conv2.kernel": (out_channels, out_channels, 3, 3),
        "conv2.bias": (out_channels,),
    }


def decoder_block(x, skip, params):
    upsampled = F.upsample2_nearest(x)
    if upsampled.shape[2:] != skip.shape[2:]:
        raise ValueError(
            f"Upsampled decoder input {upsampled.dims} does not match skip connection {skip.dims}"
        )
    out = F.concat_channels(upsampled, skip)
    out = F.conv2d(out, params["conv1.kernel"], params["conv1.bias"])
    return F.conv2d(F.relu(out), params["conv2.kernel"], params["conv2.bias"])
