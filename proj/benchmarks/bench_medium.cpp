// placeholder until the medium module lands
