"""
Reading predictability configuration package.
"""
