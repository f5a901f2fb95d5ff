# Services package for the detection lab
