from mtln.train import functional as F

NUM_ELLIPSE_PARAMS = 5


def ellipse_tuner_shapes(in_features, hidden_sizes):
    sizes = [in_features, *hidden_sizes, NUM_ELLIPSE_PARAMS]
    shapes = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        shapes[f"fc{i}.weight"] = (fan_out, fan_in)
        shapes[f"fc{i}.bias"] = (fan_out,)
    return shapes


def ellipse_tuner(features, params, num_layers):
    x = features
    for i in range(num_layers):
        x = F.fully_connected(x, params[f"fc{i}.weight"], params[f"fc{i}.bias"])
        if i < num_layers - 1:
            x = F.relu(x)
    return x
