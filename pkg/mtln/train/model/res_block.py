from mtln.train import functional as F


def res_block_shapes(in_channels, out_channels, stride):
    shapes = {
        "conv1.kernel": (out_channels, in_channels, 3, 3),
        "conv1.bias": (out_channels,),
        "conv2.kernel": (out_channels, out_channels, 3, 3),
        "conv2.bias": (out_channels,),
    }
    if in_channels != out_channels or stride != 1:
        shapes["shortcut.kernel"] = (out_channels, in_channels, 1, 1)
        shapes["shortcut.bias"] = (out_channels,)
    return shapes


def res_block(x, params, stride):
    if stride not in (1, 2):
        raise ValueError(f"ResBlock stride must be 1 or 2, got {stride}")
    out = F.relu(F.conv2d(x, params["conv1.kernel"], params["conv1.bias"], stride=stride))
    out = F.conv2d(out, params["conv2.kernel"], params["conv2.bias"])
    if "shortcut.kernel" in params:
        shortcut = F.conv2d(x, params["shortcut.kernel"], params["shortcut.bias"], stride=stride)
    else:
        shortcut = x
    return F.relu(F.add(out, shortcut))
