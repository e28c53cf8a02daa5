// placeholder until the features module lands
